import { describe, expect, it } from "vitest";

import {
  SceneDescriptor,
  applyOrbitDrag,
  boundsCenter,
  boundsDiagonal,
  cameraEye,
  initialState,
  planeNormal,
  planeOffset,
  sliderRange,
} from "../src/state.js";

const scene: SceneDescriptor = {
  name: "strands",
  count: 100_000,
  bounds: { lo: [-1, -2, -3], hi: [3, 2, 1] },
};

describe("bounds helpers", () => {
  it("compute center and diagonal", () => {
    expect(boundsCenter(scene.bounds)).toEqual([1, 0, -1]);
    expect(boundsDiagonal(scene.bounds)).toBeCloseTo(Math.sqrt(48), 12);
  });
});

describe("planeNormal", () => {
  it("gives +x at zero angles and unit length everywhere", () => {
    expect(planeNormal(0, 0)).toEqual([1, 0, 0]);
    for (const [t, p] of [[90, 0], [45, 30], [-120, -60], [180, 89]]) {
      const n = planeNormal(t, p);
      expect(Math.hypot(...n)).toBeCloseTo(1, 12);
    }
    const up = planeNormal(0, 90);
    expect(up[1]).toBeCloseTo(1, 12);
  });
});

describe("planeOffset and sliderRange", () => {
  it("puts the plane through the scene center at slider zero", () => {
    const n = planeNormal(37, -12);
    const c = boundsCenter(scene.bounds);
    const offset = planeOffset(n, c, 0);
    // signed distance of the center: n . c + offset
    expect(n[0] * c[0] + n[1] * c[1] + n[2] * c[2] + offset).toBeCloseTo(0, 12);
  });

  it("covers half the bounds diagonal in each direction", () => {
    const { min, max } = sliderRange(scene);
    expect(max).toBeCloseTo(boundsDiagonal(scene.bounds) / 2, 12);
    expect(min).toBe(-max);
  });

  it("at the slider extremes the whole scene is on one side", () => {
    const n = planeNormal(63, 21);
    const c = boundsCenter(scene.bounds);
    const { min, max } = sliderRange(scene);
    const corners: number[][] = [];
    for (let i = 0; i < 8; i++) {
      corners.push([
        i & 1 ? scene.bounds.hi[0] : scene.bounds.lo[0],
        i & 2 ? scene.bounds.hi[1] : scene.bounds.lo[1],
        i & 4 ? scene.bounds.hi[2] : scene.bounds.lo[2],
      ]);
    }
    const signed = (offset: number) =>
      corners.map((p) => n[0] * p[0] + n[1] * p[1] + n[2] * p[2] + offset);
    expect(signed(planeOffset(n, c, max)).every((d) => d >= 0)).toBe(true);
    expect(signed(planeOffset(n, c, min)).every((d) => d <= 0)).toBe(true);
  });
});

describe("initialState", () => {
  it("derives the orbit from the scene bounds and starts rendering", () => {
    const s = initialState(scene);
    expect(s.orbit.target).toEqual(boundsCenter(scene.bounds));
    expect(s.orbit.radius).toBeCloseTo(1.2 * boundsDiagonal(scene.bounds), 12);
    expect(s.orbit.azimuth).toBe(180);
    expect(s.rendering).toBe(true);
    expect(s.planeActive).toBe(false);
    const eye = cameraEye(s);
    expect(eye[2]).toBeLessThan(scene.bounds.lo[2]);
  });
});

describe("applyOrbitDrag", () => {
  it("wraps azimuth and clamps elevation", () => {
    const s = initialState(scene);
    const dragged = applyOrbitDrag(s.orbit, 200, 300);
    expect(dragged.azimuth).toBe(wrapInto(180 + 200));
    expect(dragged.elevation).toBe(89);
    expect(dragged.radius).toBe(s.orbit.radius);
  });
});

function wrapInto(a: number): number {
  let w = a % 360;
  if (w <= -180) w += 360;
  if (w > 180) w -= 360;
  return w;
}
