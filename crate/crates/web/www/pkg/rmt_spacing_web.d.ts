/* tslint:disable */
/* eslint-disable */

/**
 * Exact large-N crossover spacing density at transition parameter `lambda_big`.
 */
export function exactCurve(lambda_big: number, m: number, s_max: number, step: number): Float64Array;

export function fitLambda(lambda_big: number, m: number, s_max: number, step: number): Float64Array;

export function gridPoints(s_max: number, step: number): Float64Array;

/**
 * Crossover surmise density at surmise parameter `lambda`.
 */
export function surmiseCurve(lambda: number, s_max: number, step: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly exactCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly fitLambda: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly gridPoints: (a: number, b: number) => [number, number, number, number];
    readonly surmiseCurve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
