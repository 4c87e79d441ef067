/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const __wbg_run_free: (a: number, b: number) => void;
export const curve_b: (a: number) => [number, number];
export const curve_mean: (a: number) => [number, number];
export const curve_var: (a: number) => [number, number];
export const phase_grid: (a: number, b: number, c: number) => [number, number, number, number];
export const prior_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const reconstruct: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const run_converged: (a: number) => number;
export const run_correlation: (a: number) => number;
export const run_estimate: (a: number) => [number, number];
export const run_trace: (a: number) => [number, number];
export const run_truth: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
