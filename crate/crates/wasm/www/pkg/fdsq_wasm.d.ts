/* tslint:disable */
/* eslint-disable */

/**
 * Result of a simulated tomography run.
 */
export class Tomogram {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    analytic(): Float64Array;
    /**
     * Reconstructed Wigner function, row `y`, column `x`.
     */
    wigner(): Float64Array;
    readonly area: number;
    readonly extent: number;
    readonly grid_n: number;
    readonly orientation_deg: number;
    readonly truth_area: number;
    readonly truth_orientation_deg: number;
}

export function rotation(detuning_mhz: number, f_start_mhz: number, f_stop_mhz: number, points: number): Float64Array;

export function spectra(detuning_mhz: number, gain: number, exact: boolean, angles_deg: Float64Array, f_start_mhz: number, f_stop_mhz: number, points: number): Float64Array;

export function tomography(f_mhz: number, detuning_mhz: number, n_angles: number, n_samples: number, seed: bigint, grid_n: number): Tomogram;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_tomogram_free: (a: number, b: number) => void;
    readonly rotation: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly spectra: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly tomogram_analytic: (a: number) => [number, number];
    readonly tomogram_area: (a: number) => number;
    readonly tomogram_extent: (a: number) => number;
    readonly tomogram_grid_n: (a: number) => number;
    readonly tomogram_orientation_deg: (a: number) => number;
    readonly tomogram_truth_area: (a: number) => number;
    readonly tomogram_truth_orientation_deg: (a: number) => number;
    readonly tomogram_wigner: (a: number) => [number, number];
    readonly tomography: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
