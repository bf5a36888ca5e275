/* tslint:disable */
/* eslint-disable */

export class City {
    free(): void;
    [Symbol.dispose](): void;
    constructor(trips: number, seed: number);
    pois(): string;
    recommend(start: string, end: string, n: number): string;
    train(epochs: number): string;
    trips(): string;
    walks(limit: number): string;
}

export function score(recommended: string, truth: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_city_free: (a: number, b: number) => void;
    readonly city_new: (a: number, b: number) => number;
    readonly city_pois: (a: number) => [number, number];
    readonly city_recommend: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly city_train: (a: number, b: number) => [number, number, number, number];
    readonly city_trips: (a: number) => [number, number];
    readonly city_walks: (a: number, b: number) => [number, number];
    readonly score: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
