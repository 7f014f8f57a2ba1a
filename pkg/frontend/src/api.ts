/**
 * Typed client for the policy service.
 *
 * The console holds no pricing logic: every number displayed comes from
 * these three endpoints.
 */

export interface ServiceMeta {
  format_version: number;
  impact: boolean;
  n_days: number;
  exercise_days: number[];
  contract: { F: number; N: number; dt: number; beta: number };
  market: {
    S0: number;
    sigma: number;
    volume: number | number[];
    eta: number;
    phi: number;
    psi: number;
    k_perm: number;
  };
  risk: { gamma: number; rho_lo: number; rho_hi: number; rho_exec: number };
  grid: { n_q: number; n_A: number; q_max: number; xi: number; n_S: number | null };
}

export interface PolicyAnswer {
  order: number;
  exercise: boolean;
  theta: number;
  intrinsic: number;
  continuation: number | null;
  extrapolation_warning: boolean;
}

export interface ConsoleState {
  n: number;
  S: number;
  q: number;
  A: number;
  X: number;
}

export interface PreviewAnswer {
  state: ConsoleState;
  execution_cost: number;
}

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number | null,
    readonly extrapolation: boolean = false,
  ) {
    super(message);
  }
}

async function post<T>(base: string, path: string, body: unknown): Promise<T> {
  let response: Response;
  try {
    response = await fetch(`${base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  } catch (err) {
    throw new ServiceError(`service unreachable: ${String(err)}`, null);
  }
  if (!response.ok) {
    const detail = await response.text();
    const extrapolation = detail.includes("extrapolation_warning");
    throw new ServiceError(`${path} -> ${response.status}: ${detail}`, response.status, extrapolation);
  }
  return (await response.json()) as T;
}

export class PolicyClient {
  constructor(readonly base: string) {}

  async meta(): Promise<ServiceMeta> {
    let response: Response;
    try {
      response = await fetch(`${this.base}/meta`);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`, null);
    }
    if (!response.ok) {
      throw new ServiceError(`/meta -> ${response.status}`, response.status);
    }
    return (await response.json()) as ServiceMeta;
  }

  policy(state: { n: number; S: number; q: number; A: number }): Promise<PolicyAnswer> {
    return post<PolicyAnswer>(this.base, "/policy", state);
  }

  preview(state: ConsoleState, order: number, eps: number): Promise<PreviewAnswer> {
    return post<PreviewAnswer>(this.base, "/preview", { state, order, eps });
  }
}
