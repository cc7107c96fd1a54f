/* tslint:disable */
/* eslint-disable */

/**
 * An adaptive estimation session against a simulated qubit, advanced
 * shot by shot from the page.
 */
export class Estimator {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Flat `g, omega_r, weight` triples for at most `max_points` particles,
     * taken at an even stride through the cloud.
     */
    cloud(max_points: number): Float64Array;
    /**
     * Prior: g log-normal with mean 1 and std 0.25, omega_r normal(0, 1).
     */
    constructor(seed: number, truth_g: number, truth_omega: number, p_e: number, t1: number, particles: number);
    shots(): number;
    /**
     * Measures and updates `shots` times; returns how many shots ran (fewer
     * if the posterior collapsed).
     */
    step(shots: number): number;
    /**
     * `mean_g, std_g, mean_omega, std_omega, ess`.
     */
    summary(): Float64Array;
    /**
     * Flat rows of `shot, omega_q, t, outcome, mean_g, std_g, mean_omega, std_omega`.
     */
    trace(): Float64Array;
    truth_g(): number;
    truth_omega(): number;
}

/**
 * Excited-state probability on an `n_delta x n_t` grid, rows by detuning
 * `delta = (omega_q - omega_r) / 2g` in `[-delta_max, delta_max]` and
 * columns by waiting time in `[0, t_max]`. Pass `t1 = Infinity` for no
 * relaxation.
 */
export function spectrum(g: number, t1: number, delta_max: number, n_delta: number, t_max: number, n_t: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_estimator_free: (a: number, b: number) => void;
    readonly estimator_cloud: (a: number, b: number) => [number, number];
    readonly estimator_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly estimator_shots: (a: number) => number;
    readonly estimator_step: (a: number, b: number) => [number, number, number];
    readonly estimator_summary: (a: number) => [number, number];
    readonly estimator_trace: (a: number) => [number, number];
    readonly estimator_truth_g: (a: number) => number;
    readonly estimator_truth_omega: (a: number) => number;
    readonly spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
