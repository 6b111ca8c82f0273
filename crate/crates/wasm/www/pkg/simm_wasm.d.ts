/* tslint:disable */
/* eslint-disable */

/**
 * Simulated curves with a model fitted on demand.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    aligned(n: number): Float64Array;
    curve(n: number): Float64Array;
    fit(em: boolean, max_outer: number): number;
    fittedWarp(n: number): Float64Array;
    grid(): Float64Array;
    constructor(seed: number, samples: number, warp_tau: number, amp_scale: number, kappa: number, noise_sd: number);
    parameters(): string;
    template(): Float64Array;
    trueWarp(n: number): Float64Array;
    /**
     * `[before, after]` mean cross-sectional variance.
     */
    varianceReduction(): Float64Array;
    readonly count: number;
}

/**
 * Matérn correlation at the given lags.
 */
export function maternCurve(alpha: number, kappa: number, lags: Float64Array): Float64Array;

/**
 * Warp functions of `count` random draws on `grid_points` points, concatenated.
 */
export function warpDraws(seed: number, count: number, tau: number, anchors: number, bridge: boolean, grid_points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly maternCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly session_aligned: (a: number, b: number) => [number, number, number, number];
    readonly session_count: (a: number) => number;
    readonly session_curve: (a: number, b: number) => [number, number];
    readonly session_fit: (a: number, b: number, c: number) => [number, number, number];
    readonly session_fittedWarp: (a: number, b: number) => [number, number, number, number];
    readonly session_grid: (a: number) => [number, number];
    readonly session_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly session_parameters: (a: number) => [number, number, number, number];
    readonly session_template: (a: number) => [number, number, number, number];
    readonly session_trueWarp: (a: number, b: number) => [number, number, number, number];
    readonly session_varianceReduction: (a: number) => [number, number, number, number];
    readonly warpDraws: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
