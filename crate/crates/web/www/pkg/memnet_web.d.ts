/* tslint:disable */
/* eslint-disable */

/**
 * Conductance response to the calibration pulse train, plus the fitted
 * ranges in siemens.
 */
export class Calibration {
    free(): void;
    [Symbol.dispose](): void;
    conductance(): Float64Array;
    constructor(model_name: string);
    /**
     * `[g_abs_min, g_abs_max, g_lin_min, g_lin_max]`
     */
    ranges(): Float64Array;
    time(): Float64Array;
    voltage(): Float64Array;
}

/**
 * Device-mode XOR network trained a few epochs at a time.
 */
export class XorTrainer {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Conductances of layer `k` in siemens, row-major.
     */
    conductances(k: number): Float64Array;
    /**
     * Number of corners classified correctly.
     */
    correct(): number;
    epochs(): number;
    constructor(model_name: string, seed: bigint);
    /**
     * Probability of class 1 for each of the four corners.
     */
    outputs(): Float64Array;
    /**
     * Runs `n` epochs and returns the mean loss of the last one.
     */
    train(n: number): number;
}

/**
 * Write phase for one synapse with input `x` and error `y`, sampled at
 * `n` points: `[t, row voltage, switch]` triples, flattened.
 */
export function write_phase(model_name: string, x: number, y: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_calibration_free: (a: number, b: number) => void;
    readonly __wbg_xortrainer_free: (a: number, b: number) => void;
    readonly calibration_conductance: (a: number) => [number, number];
    readonly calibration_new: (a: number, b: number) => [number, number, number];
    readonly calibration_ranges: (a: number) => [number, number];
    readonly calibration_time: (a: number) => [number, number];
    readonly calibration_voltage: (a: number) => [number, number];
    readonly write_phase: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly xortrainer_conductances: (a: number, b: number) => [number, number];
    readonly xortrainer_correct: (a: number) => [number, number, number];
    readonly xortrainer_epochs: (a: number) => number;
    readonly xortrainer_new: (a: number, b: number, c: bigint) => [number, number, number];
    readonly xortrainer_outputs: (a: number) => [number, number, number, number];
    readonly xortrainer_train: (a: number, b: number) => [number, number, number];
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
