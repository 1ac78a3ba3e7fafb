/** Orbit-camera math: spherical parameters around a target point. */

export interface OrbitParams {
  /** Degrees around the vertical (y) axis; wraps continuously. */
  azimuth: number;
  /** Degrees above the horizontal plane; clamped to avoid the poles. */
  elevation: number;
  radius: number;
  target: [number, number, number];
}

const DEG = Math.PI / 180;
export const MAX_ELEVATION = 89;

/** Wrap an angle in degrees into (-180, 180]. */
export function wrapAngle(a: number): number {
  let w = a % 360;
  if (w <= -180) w += 360;
  if (w > 180) w -= 360;
  return w;
}

export function clampElevation(e: number): number {
  return Math.min(MAX_ELEVATION, Math.max(-MAX_ELEVATION, e));
}

/**
 * Eye position for the orbit parameters. Azimuth 180, elevation 0
 * places the eye at target + (0, 0, -radius), matching the service's
 * default camera.
 */
export function orbitEye(p: OrbitParams): [number, number, number] {
  const az = p.azimuth * DEG;
  const el = clampElevation(p.elevation) * DEG;
  const c = Math.cos(el);
  return [
    p.target[0] + p.radius * c * Math.sin(az),
    p.target[1] + p.radius * Math.sin(el),
    p.target[2] + p.radius * c * Math.cos(az),
  ];
}
