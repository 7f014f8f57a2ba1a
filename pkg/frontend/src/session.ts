/**
 * Session state for stepping a live program through its trading days.
 *
 * The committed history is the single source of truth on the client, and
 * every committed transition comes back from the service's /preview
 * endpoint, so the displayed (q, A, X) always equals the service-side
 * recomputation.  What-if exploration runs through the same endpoints but
 * never touches committed state; the day only advances on commit.
 */

import {
  ConsoleState,
  PolicyAnswer,
  PolicyClient,
  ServiceError,
  ServiceMeta,
} from "./api.js";

export interface HistoryRow {
  day: number;
  S: number;
  A: number;
  q: number;
  order: number;
  X: number;
  exercised: boolean;
}

export interface Settlement {
  day: number;
  sharesDelivered: number;
  settlementPremium: number; // residual-block premium implied by the served values
  averagePrice: number;
}

export interface WhatIfBranch {
  label: string;
  order: number;
  eps: number;
  next: ConsoleState;
  theta: number | null; // value at the previewed state, when the service can price it
}

export type SessionStatus = "connecting" | "active" | "settled" | "error";

export interface SessionSnapshot {
  status: SessionStatus;
  day: number;
  state: ConsoleState;
  history: HistoryRow[];
  recommendation: PolicyAnswer | null;
  settlement: Settlement | null;
  banner: string | null;
  extrapolated: boolean;
}

/** Innovation implied by an entered close, eps = (S_next - S) / (sigma sqrt(dt)). */
export function impliedInnovation(meta: ServiceMeta, from: number, to: number): number {
  const step = meta.market.sigma * Math.sqrt(meta.contract.dt);
  if (step === 0) {
    return 0;
  }
  return (to - from) / step;
}

/** Deterministic five-point innovation sampler (matches the pricing measure). */
export function sampleInnovation(uniform: number): number {
  if (uniform < 1 / 12) return -2;
  if (uniform < 1 / 12 + 1 / 6) return -1;
  if (uniform < 1 / 12 + 1 / 6 + 1 / 2) return 0;
  if (uniform < 1 / 12 + 1 / 6 + 1 / 2 + 1 / 6) return 1;
  return 2;
}

/** Small deterministic PRNG so "draw a day" is reproducible per session seed. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class Session {
  private meta: ServiceMeta | null = null;
  private state: ConsoleState = { n: 0, S: 0, q: 0, A: 0, X: 0 };
  private history: HistoryRow[] = [];
  private recommendation: PolicyAnswer | null = null;
  private settlement: Settlement | null = null;
  private status: SessionStatus = "connecting";
  private banner: string | null = null;

  constructor(private readonly client: PolicyClient) {}

  snapshot(): SessionSnapshot {
    return {
      status: this.status,
      day: this.state.n,
      state: { ...this.state },
      history: this.history.map((row) => ({ ...row })),
      recommendation: this.recommendation ? { ...this.recommendation } : null,
      settlement: this.settlement ? { ...this.settlement } : null,
      banner: this.banner,
      extrapolated: this.recommendation?.extrapolation_warning ?? false,
    };
  }

  serviceMeta(): ServiceMeta {
    if (!this.meta) {
      throw new Error("session not connected");
    }
    return this.meta;
  }

  async connect(): Promise<SessionSnapshot> {
    try {
      this.meta = await this.client.meta();
    } catch (err) {
      this.status = "error";
      this.banner = err instanceof Error ? err.message : String(err);
      return this.snapshot();
    }
    const S0 = this.meta.market.S0;
    this.state = { n: 0, S: S0, q: 0, A: S0, X: 0 };
    this.history = [];
    this.settlement = null;
    this.status = "active";
    this.banner = null;
    await this.refreshRecommendation();
    return this.snapshot();
  }

  /** Ask the service for the decision at the current committed state. */
  async refreshRecommendation(): Promise<PolicyAnswer | null> {
    if (this.status !== "active" || !this.meta) {
      return null;
    }
    try {
      this.recommendation = await this.client.policy({
        n: this.state.n,
        S: this.state.S,
        q: this.state.q,
        A: this.state.A,
      });
      this.banner = null;
    } catch (err) {
      // no state change on service trouble, just surface the banner
      if (err instanceof ServiceError) {
        this.banner = err.message;
        return null;
      }
      throw err;
    }
    return this.recommendation;
  }

  /**
   * Commit one day: follow the service's recommendation at the current
   * state, either settling (exercise) or trading the recommended order
   * into the entered next close.  Returns the updated snapshot.
   */
  async stepDay(nextClose: number): Promise<SessionSnapshot> {
    if (this.status !== "active" || !this.meta) {
      return this.snapshot();
    }
    const reco = this.recommendation ?? (await this.refreshRecommendation());
    if (!reco) {
      return this.snapshot();
    }
    if (reco.exercise) {
      this.settleNow(reco);
      return this.snapshot();
    }
    const eps = impliedInnovation(this.meta, this.state.S, nextClose);
    let preview;
    try {
      preview = await this.client.preview(this.state, reco.order, eps);
    } catch (err) {
      if (err instanceof ServiceError) {
        this.banner = err.message;
        return this.snapshot();
      }
      throw err;
    }
    this.history.push({
      day: this.state.n,
      S: this.state.S,
      A: this.state.A,
      q: this.state.q,
      order: reco.order,
      X: this.state.X,
      exercised: false,
    });
    this.state = preview.state;
    this.recommendation = null;
    if (this.state.n >= this.meta.contract.N) {
      // the close of the final day has been entered: settlement is forced
      const terminal = await this.client.policy({
        n: this.state.n,
        S: this.state.S,
        q: this.state.q,
        A: this.state.A,
      });
      this.settleNow(terminal);
    } else {
      await this.refreshRecommendation();
    }
    return this.snapshot();
  }

  /** Draw the day's innovation from the model law instead of entering a close. */
  async stepSampled(random: () => number): Promise<SessionSnapshot> {
    if (!this.meta) {
      return this.snapshot();
    }
    const eps = sampleInnovation(random());
    const step = this.meta.market.sigma * Math.sqrt(this.meta.contract.dt);
    return this.stepDay(this.state.S + step * eps);
  }

  private settleNow(reco: PolicyAnswer): void {
    if (!this.meta) {
      return;
    }
    const meta = this.meta;
    const aEff = (1 - meta.contract.beta) * this.state.A;
    const shares = meta.contract.F / aEff;
    // the served settle-now value is F(S/A' - 1) + premium: back the premium out
    const premium = reco.intrinsic - meta.contract.F * (this.state.S / aEff - 1);
    this.history.push({
      day: this.state.n,
      S: this.state.S,
      A: this.state.A,
      q: this.state.q,
      order: 0,
      X: this.state.X,
      exercised: true,
    });
    this.settlement = {
      day: this.state.n,
      sharesDelivered: shares,
      settlementPremium: premium,
      averagePrice: this.state.A,
    };
    this.status = "settled";
    this.recommendation = reco;
  }

  /**
   * Read-only what-if exploration: preview candidate (order, eps) moves
   * from the current state and price the resulting states.  Committed
   * history and the current state are never touched.
   */
  async whatIf(orders: number[], epsScenarios: number[]): Promise<WhatIfBranch[]> {
    if (this.status !== "active" || !this.meta) {
      return [];
    }
    const meta = this.meta;
    const branches: WhatIfBranch[] = [];
    for (const order of orders) {
      for (const eps of epsScenarios) {
        let preview;
        try {
          preview = await this.client.preview(this.state, order, eps);
        } catch (err) {
          if (err instanceof ServiceError) {
            continue; // inadmissible branch, skip silently
          }
          throw err;
        }
        let theta: number | null = null;
        if (preview.state.n <= meta.contract.N - 1) {
          try {
            const answer = await this.client.policy(preview.state);
            theta = answer.theta;
          } catch (err) {
            if (!(err instanceof ServiceError)) {
              throw err;
            }
          }
        }
        branches.push({
          label: `order ${order.toFixed(0)} / eps ${eps.toFixed(2)}`,
          order,
          eps,
          next: preview.state,
          theta,
        });
      }
    }
    return branches;
  }

  /** Trajectory CSV in the simulator's format, for offline replay. */
  exportCsv(): string {
    const lines = ["day,S,A,q,order,X,exercised"];
    for (const row of this.history) {
      lines.push(
        [row.day, row.S, row.A, row.q, row.order, row.X, row.exercised ? 1 : 0].join(","),
      );
    }
    return lines.join("\n") + "\n";
  }
}
