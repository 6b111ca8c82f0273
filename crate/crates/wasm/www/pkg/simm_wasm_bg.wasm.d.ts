/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_session_free: (a: number, b: number) => void;
export const maternCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const session_aligned: (a: number, b: number) => [number, number, number, number];
export const session_count: (a: number) => number;
export const session_curve: (a: number, b: number) => [number, number];
export const session_fit: (a: number, b: number, c: number) => [number, number, number];
export const session_fittedWarp: (a: number, b: number) => [number, number, number, number];
export const session_grid: (a: number) => [number, number];
export const session_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const session_parameters: (a: number) => [number, number, number, number];
export const session_template: (a: number) => [number, number, number, number];
export const session_trueWarp: (a: number, b: number) => [number, number, number, number];
export const session_varianceReduction: (a: number) => [number, number, number, number];
export const warpDraws: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
