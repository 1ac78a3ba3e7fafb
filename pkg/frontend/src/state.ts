/** Viewer state: scene descriptors, plane parameterization, UI state. */

import { OrbitParams, orbitEye, wrapAngle, clampElevation } from "./camera.js";
import { ClipMode } from "./protocol.js";

export interface Bounds {
  lo: number[];
  hi: number[];
}

export interface SceneDescriptor {
  name: string;
  count: number;
  bounds: Bounds;
}

export function boundsCenter(b: Bounds): [number, number, number] {
  return [
    (b.lo[0] + b.hi[0]) / 2,
    (b.lo[1] + b.hi[1]) / 2,
    (b.lo[2] + b.hi[2]) / 2,
  ];
}

export function boundsDiagonal(b: Bounds): number {
  const dx = b.hi[0] - b.lo[0];
  const dy = b.hi[1] - b.lo[1];
  const dz = b.hi[2] - b.lo[2];
  return Math.sqrt(dx * dx + dy * dy + dz * dz);
}

/**
 * Plane orientation as two spherical angles (degrees): theta rotates
 * around the vertical axis, phi tilts toward it. theta=0, phi=0 gives
 * the +x normal.
 */
export interface PlaneParams {
  theta: number;
  phi: number;
  /** Slider position along the normal, in [-diagonal/2, +diagonal/2]. */
  slider: number;
}

const DEG = Math.PI / 180;

export function planeNormal(theta: number, phi: number): [number, number, number] {
  const t = theta * DEG;
  const p = phi * DEG;
  return [Math.cos(p) * Math.cos(t), Math.sin(p), Math.cos(p) * Math.sin(t)];
}

/**
 * Plane offset for a slider position: slider 0 puts the plane through
 * the scene center; the ends of the [-diag/2, diag/2] range put the
 * whole scene on one side.
 */
export function planeOffset(
  normal: [number, number, number],
  center: [number, number, number],
  slider: number,
): number {
  const nc = normal[0] * center[0] + normal[1] * center[1] + normal[2] * center[2];
  return slider - nc;
}

export function sliderRange(scene: SceneDescriptor): { min: number; max: number } {
  const half = boundsDiagonal(scene.bounds) / 2;
  return { min: -half, max: half };
}

export type ConnectionStatus = "disconnected" | "connecting" | "connected" | "error";

export interface FrameStats {
  id: number;
  renderMs: number;
  mode: string;
}

export interface ViewerState {
  status: ConnectionStatus;
  scene: SceneDescriptor | null;
  orbit: OrbitParams;
  plane: PlaneParams;
  planeActive: boolean;
  mode: ClipMode;
  compare: boolean;
  lastFrame: FrameStats | null;
  rendering: boolean;
}

export function initialState(scene: SceneDescriptor): ViewerState {
  return {
    status: "connecting",
    scene,
    orbit: {
      azimuth: 180,
      elevation: 0,
      radius: 1.2 * Math.max(boundsDiagonal(scene.bounds), 1e-6),
      target: boundsCenter(scene.bounds),
    },
    plane: { theta: 0, phi: 0, slider: 0 },
    planeActive: false,
    mode: "rara",
    compare: false,
    lastFrame: null,
    rendering: true,
  };
}

export function applyOrbitDrag(
  orbit: OrbitParams,
  dAzimuth: number,
  dElevation: number,
): OrbitParams {
  return {
    ...orbit,
    azimuth: wrapAngle(orbit.azimuth + dAzimuth),
    elevation: clampElevation(orbit.elevation + dElevation),
  };
}

export function cameraEye(state: ViewerState): [number, number, number] {
  return orbitEye(state.orbit);
}
