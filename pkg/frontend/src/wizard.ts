// Guided-session state machine. The view layer renders `state`; every
// transition round-trips through the server and stores the returned
// snapshot verbatim (no optimistic updates, no local strategy math).

import { ApiClient, ApiError, SessionSnapshot } from "./api.js";
import { parseProcedure, sampleStatuses, SampleStatus } from "./tree.js";

export interface WizardState {
  phase: "setup" | "running" | "complete" | "error";
  priors: number[];
  strategy: string;
  snapshot: SessionSnapshot | null;
  statuses: SampleStatus[];
  log: string[];
  error: string | null;
  busy: boolean;
}

export class WizardMachine {
  state: WizardState = initialState();
  private listeners: Array<() => void> = [];

  constructor(private api: ApiClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  private fail(error: unknown): void {
    this.state = {
      ...this.state,
      phase: "error",
      busy: false,
      error: error instanceof Error ? error.message : String(error),
    };
    this.emit();
  }

  async start(priors: number[], strategy: string = "optimal"): Promise<void> {
    if (this.state.busy) return;
    this.state = { ...initialState(), priors, strategy, busy: true };
    this.emit();
    try {
      const snapshot = await this.api.createSession(priors, strategy);
      this.apply(snapshot, [
        `session ${snapshot.id.slice(0, 8)} started over ${snapshot.n} samples`,
      ]);
    } catch (error) {
      this.fail(error);
    }
  }

  async answer(result: "negative" | "positive"): Promise<void> {
    const snapshot = this.state.snapshot;
    if (!snapshot || this.state.busy || snapshot.status !== "running") return;
    this.state = { ...this.state, busy: true };
    this.emit();
    try {
      const pool = snapshot.next_pool ?? [];
      const next = await this.api.postResult(snapshot.id, result, snapshot.tests_used);
      this.apply(next, [...this.state.log, `pool {${pool.join(",")}} tested ${result}`]);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // someone else advanced the session; resynchronize instead of failing
        await this.refresh();
        return;
      }
      this.fail(error);
    }
  }

  /** Refetch the authoritative snapshot; local state mirrors it exactly. */
  async refresh(): Promise<void> {
    const snapshot = this.state.snapshot;
    if (!snapshot) return;
    try {
      this.apply(await this.api.getSession(snapshot.id), this.state.log);
    } catch (error) {
      this.fail(error);
    }
  }

  async discard(): Promise<void> {
    const snapshot = this.state.snapshot;
    if (snapshot) {
      try {
        await this.api.deleteSession(snapshot.id);
      } catch {
        // already gone is fine
      }
    }
    this.state = initialState();
    this.emit();
  }

  private apply(snapshot: SessionSnapshot, log: string[]): void {
    const statuses = deriveStatuses(snapshot);
    const phase = snapshot.status === "complete" ? "complete" : "running";
    if (phase === "complete") {
      const infected = statuses
        .map((status, i) => (status === "infected" ? i + 1 : null))
        .filter((v) => v !== null);
      log = [
        ...log,
        `complete: ${snapshot.tests_used} tests used (individual testing needs ${snapshot.n})`,
        infected.length ? `infected samples: ${infected.join(", ")}` : "all samples clean",
      ];
    }
    this.state = {
      ...this.state,
      phase,
      snapshot,
      statuses,
      log,
      busy: false,
      error: null,
    };
    this.emit();
  }
}

export function deriveStatuses(snapshot: SessionSnapshot): SampleStatus[] {
  if (snapshot.status === "complete" && snapshot.outcome) {
    return [...snapshot.outcome].map((bit) => (bit === "1" ? "infected" : "clean"));
  }
  if (snapshot.remaining_tree) {
    return sampleStatuses(parseProcedure(snapshot.remaining_tree), snapshot.n);
  }
  return new Array<SampleStatus>(snapshot.n).fill("unknown");
}

function initialState(): WizardState {
  return {
    phase: "setup",
    priors: [],
    strategy: "optimal",
    snapshot: null,
    statuses: [],
    log: [],
    error: null,
    busy: false,
  };
}
