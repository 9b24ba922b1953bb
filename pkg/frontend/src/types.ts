/** Payload shapes served by the operator API. */

export interface PairSample {
  t: number;
  setpoint: number;
  u: number;
  y: number;
  t_env: number;
  i: number;
  v: number;
  y_twin: number;
  u_twin: number;
}

export interface Divergence {
  rmse_y: number;
  max_abs_y: number;
  rmse_u: number;
  horizon: number;
  samples: number;
}

export interface GaProgress {
  running: boolean;
  generation: number;
  best_cost: number | null;
  history: number[];
}

export interface Params {
  alpha: number;
  r: number;
  k: number;
  c: number;
}

export interface Status {
  status: string;
  mode: string;
  plant_endpoint: string;
  dt: number;
  samples: number;
  twin_params: Params;
  divergence: Divergence | null;
  ga: GaProgress;
  gaps: number;
  events: string[];
}

export interface MatchResult {
  best: Params;
  best_cost: number;
  history: number[];
  evaluations: number;
  swapped: boolean;
}

export interface PresetEntry {
  name: string;
  params: Params;
}

export interface PresetsPayload {
  presets: PresetEntry[];
  bounds: Record<string, [number, number]>;
}

export interface OfflineSample {
  t: number;
  setpoint: number;
  u: number;
  y: number;
  t_env: number;
  i: number;
  v: number;
}

export type StreamEvent =
  | ({ type: "PAIR" } & PairSample)
  | { type: "GA"; generation: number; best_cost: number }
  | { type: "GA_DONE"; best_cost: number; best: Params }
  | { type: "STATUS"; status: string; msg?: string };
