/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_calibration_free: (a: number, b: number) => void;
export const __wbg_xortrainer_free: (a: number, b: number) => void;
export const calibration_conductance: (a: number) => [number, number];
export const calibration_new: (a: number, b: number) => [number, number, number];
export const calibration_ranges: (a: number) => [number, number];
export const calibration_time: (a: number) => [number, number];
export const calibration_voltage: (a: number) => [number, number];
export const write_phase: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const xortrainer_conductances: (a: number, b: number) => [number, number];
export const xortrainer_correct: (a: number) => [number, number, number];
export const xortrainer_epochs: (a: number) => number;
export const xortrainer_new: (a: number, b: number, c: bigint) => [number, number, number];
export const xortrainer_outputs: (a: number) => [number, number, number, number];
export const xortrainer_train: (a: number, b: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
