/* tslint:disable */
/* eslint-disable */

/**
 * Periodic auto- and cross-correlation magnitude (dB re `M`) of the first
 * two sequences of a bank built over delay support `0..=support`.
 */
export function correlation(sequences: number, m: number, support: number, pseudo_random: boolean, seed: number): string;

/**
 * SE and image entropy versus `eta` for fixed roles, averaged over
 * `replicates` random UE placements (common across `eta`).
 */
export function eta_sweep(aps: number, antennas: number, subcarriers: number, rx: string, points: number, replicates: number): string;

/**
 * One snapshot: the fused image (dB, peak-normalized, row-major from the
 * ROI's lower-left corner) with its entropy, SE and sensing SINR.
 */
export function snapshot(aps: number, antennas: number, subcarriers: number, bandwidth_mhz: number, pitch: number, rx: string, eta: number, pseudo_random: boolean, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly correlation: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly eta_sweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly snapshot: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
