/* tslint:disable */
/* eslint-disable */

/**
 * Posterior mean and variance of one tilted prior as `B` sweeps a range.
 */
export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly b: Float64Array;
    readonly mean: Float64Array;
    readonly var: Float64Array;
}

/**
 * One AMP reconstruction of a synthetic spike-and-slab signal.
 */
export class Run {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly converged: boolean;
    readonly correlation: number;
    readonly estimate: Float64Array;
    /**
     * MSE in dB after each iteration.
     */
    readonly trace: Float64Array;
    readonly truth: Float64Array;
}

/**
 * Final MSE in dB on a `steps`×`steps` grid of cell-centred `(alpha, rho)`
 * values, alpha-major.
 */
export function phase_grid(n: number, steps: number, seed: number): Float64Array;

/**
 * `kind` is `bernoulli` (bias in `mean`), `gauss-bernoulli` or
 * `truncated` (slab cut to [0, 1]).
 */
export function prior_curve(kind: string, rho: number, mean: number, _var: number, a: number, b_lo: number, b_hi: number, points: number): Curve;

/**
 * Gauss-Bernoulli signal of length `n` and sparsity `rho`, sensed at rate
 * `alpha` and reconstructed with the matched i.i.d. prior.
 */
export function reconstruct(n: number, rho: number, alpha: number, damping: number, max_iter: number, seed: number): Run;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly __wbg_run_free: (a: number, b: number) => void;
    readonly curve_b: (a: number) => [number, number];
    readonly curve_mean: (a: number) => [number, number];
    readonly curve_var: (a: number) => [number, number];
    readonly phase_grid: (a: number, b: number, c: number) => [number, number, number, number];
    readonly prior_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly reconstruct: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly run_converged: (a: number) => number;
    readonly run_correlation: (a: number) => number;
    readonly run_estimate: (a: number) => [number, number];
    readonly run_trace: (a: number) => [number, number];
    readonly run_truth: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
