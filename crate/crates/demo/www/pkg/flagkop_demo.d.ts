/* tslint:disable */
/* eslint-disable */

/**
 * `|η(z, ζ)|` for fixed `z` and `ζ` on the grid; zero exactly at `ζ = z`.
 */
export function eta_grid(z_re: number, z_im: number, size: number, extent: number): Float64Array;

/**
 * `log₁₀ |K_{dζ}(z, ζ)|`, which blows up like the Cauchy kernel at `ζ = z`.
 */
export function kernel_grid(z_re: number, z_im: number, size: number, extent: number): Float64Array;

/**
 * Terms of the Koppelman formula for `ω_FS` at `z`, as
 * `[φ, ∫K∧∂̄φ, ∂̄∫K∧φ, ∫P∧φ, residual]` (coefficients of `dz∧dz̄`, re/im pairs,
 * then the residual).
 */
export function koppelman_terms(z_re: number, z_im: number, order: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly eta_grid: (a: number, b: number, c: number, d: number) => [number, number];
    readonly kernel_grid: (a: number, b: number, c: number, d: number) => [number, number];
    readonly koppelman_terms: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
