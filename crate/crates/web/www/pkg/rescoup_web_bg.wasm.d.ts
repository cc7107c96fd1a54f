/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_estimator_free: (a: number, b: number) => void;
export const estimator_cloud: (a: number, b: number) => [number, number];
export const estimator_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const estimator_shots: (a: number) => number;
export const estimator_step: (a: number, b: number) => [number, number, number];
export const estimator_summary: (a: number) => [number, number];
export const estimator_trace: (a: number) => [number, number];
export const estimator_truth_g: (a: number) => number;
export const estimator_truth_omega: (a: number) => number;
export const spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
