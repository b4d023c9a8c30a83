/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_tomogram_free: (a: number, b: number) => void;
export const rotation: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const spectra: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const tomogram_analytic: (a: number) => [number, number];
export const tomogram_area: (a: number) => number;
export const tomogram_extent: (a: number) => number;
export const tomogram_grid_n: (a: number) => number;
export const tomogram_orientation_deg: (a: number) => number;
export const tomogram_truth_area: (a: number) => number;
export const tomogram_truth_orientation_deg: (a: number) => number;
export const tomogram_wigner: (a: number) => [number, number];
export const tomography: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
