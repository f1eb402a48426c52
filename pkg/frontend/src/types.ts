/** Shared types for the MSI bundle and renderers. */

export interface BundleManifest {
  format_version: number;
  width: number;
  height: number;
  num_layers: number;
  /** Sphere radii in meters, strictly ascending, innermost first. */
  radii_m: number[];
  color_space: string;
  alpha: string;
  layer_files: string[];
}

export interface MsiBundle {
  manifest: BundleManifest;
  /** Per layer: RGBA interleaved floats in [0, 1], row-major, length w*h*4. */
  layers: Float32Array[];
}

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

/** One structured schema violation; `field` names the offending entry. */
export interface BundleViolation {
  field: string;
  message: string;
}

export class BundleValidationError extends Error {
  readonly violations: BundleViolation[];

  constructor(violations: BundleViolation[]) {
    super(
      "invalid MSI bundle: " +
        violations.map((v) => `${v.field}: ${v.message}`).join("; "),
    );
    this.name = "BundleValidationError";
    this.violations = violations;
  }
}
