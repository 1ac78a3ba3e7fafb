/** Trailing-edge debounce; the last call's arguments win. */

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms = 16,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) {
      clearTimeout(timer);
    }
    timer = setTimeout(() => {
      timer = undefined;
      fn(...args);
    }, ms);
  };
}
