/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_city_free: (a: number, b: number) => void;
export const city_new: (a: number, b: number) => number;
export const city_pois: (a: number) => [number, number];
export const city_recommend: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const city_train: (a: number, b: number) => [number, number, number, number];
export const city_trips: (a: number) => [number, number];
export const city_walks: (a: number, b: number) => [number, number];
export const score: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
