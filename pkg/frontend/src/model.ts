/**
 * Dashboard view state and its reducers, kept free of DOM and network code so
 * the behavior is unit-testable: rolling paired-trace buffer, divergence
 * gauges, matching progress, setpoint gating, offline overlays.
 *
 * Everything shown is received from the operator API; the model never
 * computes physics of its own.
 */

import type {
  Divergence,
  GaProgress,
  OfflineSample,
  PairSample,
  Params,
  Status,
  StreamEvent,
} from "./types.js";

export const SETPOINT_MIN_C = -20;
export const SETPOINT_MAX_C = 90;
export const MATCH_MIN_SAMPLES = 60;
export const DEFAULT_BUFFER = 600;

export type Connection = "connecting" | "live" | "disconnected";

export interface OptimisticSetpoint {
  value: number;
  sentAtSample: number;
}

export class DashboardModel {
  readonly bufferSize: number;
  pairs: PairSample[] = [];
  totalPairs = 0;
  connection: Connection = "connecting";
  divergence: Divergence | null = null;
  ga: GaProgress = { running: false, generation: 0, best_cost: null, history: [] };
  twinParams: Params | null = null;
  previousParams: Params | null = null;
  pendingSetpoint: OptimisticSetpoint | null = null;
  overlay: OfflineSample[] | null = null;
  lastError: string | null = null;
  events: string[] = [];

  constructor(bufferSize: number = DEFAULT_BUFFER) {
    this.bufferSize = bufferSize;
  }

  apply(event: StreamEvent): void {
    switch (event.type) {
      case "PAIR": {
        const { type: _ignored, ...pair } = event;
        this.applyPair(pair);
        break;
      }
      case "GA":
        this.ga = {
          running: true,
          generation: event.generation,
          best_cost: event.best_cost,
          history: [...this.ga.history, event.best_cost],
        };
        break;
      case "GA_DONE":
        this.ga = { ...this.ga, running: false, best_cost: event.best_cost };
        this.previousParams = this.twinParams;
        this.twinParams = event.best;
        break;
      case "STATUS":
        if (event.status === "faulted") {
          this.lastError = event.msg ?? "session faulted";
        }
        break;
    }
  }

  applyPair(pair: PairSample): void {
    this.pairs.push(pair);
    this.totalPairs += 1;
    if (this.pairs.length > this.bufferSize) {
      this.pairs.splice(0, this.pairs.length - this.bufferSize);
    }
    if (
      this.pendingSetpoint !== null &&
      pair.setpoint === this.pendingSetpoint.value
    ) {
      this.pendingSetpoint = null; // reconciled with telemetry
    }
  }

  applyStatus(status: Status): void {
    this.divergence = status.divergence;
    if (!this.ga.running) this.ga = status.ga;
    this.previousParams = this.twinParams;
    this.twinParams = status.twin_params;
    this.events = status.events;
  }

  setConnection(connection: Connection): void {
    this.connection = connection;
  }

  /** Message explaining why a setpoint is rejected client-side, or null. */
  setpointProblem(value: number): string | null {
    if (!Number.isFinite(value)) return "setpoint must be a number";
    if (value < SETPOINT_MIN_C || value > SETPOINT_MAX_C) {
      return `setpoint must lie within [${SETPOINT_MIN_C}, ${SETPOINT_MAX_C}] degC`;
    }
    return null;
  }

  markSetpointSent(value: number): void {
    this.pendingSetpoint = { value, sentAtSample: this.totalPairs };
  }

  /** Samples elapsed since the optimistic marker, for latency bookkeeping. */
  samplesSinceSetpoint(): number | null {
    if (this.pendingSetpoint === null) return null;
    return this.totalPairs - this.pendingSetpoint.sentAtSample;
  }

  canTriggerMatch(): boolean {
    return this.matchDisabledReason() === null;
  }

  matchDisabledReason(): string | null {
    if (this.ga.running) return "matching already running";
    if (this.totalPairs < MATCH_MIN_SAMPLES) {
      return `needs at least ${MATCH_MIN_SAMPLES} recorded samples (have ${this.totalPairs})`;
    }
    return null;
  }

  /** Elitism guarantee: the displayed cost history may never rise. */
  historyNonIncreasing(): boolean {
    const h = this.ga.history;
    return h.every((value, idx) => idx === 0 || value <= h[idx - 1]!);
  }

  setOverlay(samples: OfflineSample[] | null): void {
    this.overlay = samples;
  }

  latest(): PairSample | null {
    return this.pairs.length ? this.pairs[this.pairs.length - 1]! : null;
  }
}
