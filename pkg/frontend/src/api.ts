// Thin client for the exercise service (schema pl-exercise/1).
// The UI displays only numbers this API returns.

export interface SessionInfo {
  schema: string;
  id: string;
  lives_per_system: number;
  seed: number;
  rounds_played: number;
  initial_split: Record<string, number>;
}

export type HistoryEntry = [string, string, string]; // [event tag, system, outcome]

export interface Student {
  index: number;
  system: string;
  history: HistoryEntry[];
  outcome: string;
}

export interface Pair {
  alice: number;
  bob: number;
  outcome_a: string;
  outcome_b: string;
  same: boolean;
}

export interface ClassCount {
  outcome_a: string;
  outcome_b: string;
  count: number;
}

export interface RoundResult {
  schema: string;
  round: number;
  settings: { a: number; b: number };
  setting_relation: "same" | "different";
  students: { alice: Student[]; bob: Student[] };
  pairs: Pair[];
  counts: { same: number; different: number };
  class_counts: ClassCount[];
}

export interface Summary {
  schema: string;
  id: string;
  tallies: Record<string, { rounds: number; same_outcome_pairs: number; total_pairs: number }>;
  p_same_given_different: number | null;
  p_opposite_given_same: number | null;
  different_setting_pairs: number;
  same_setting_pairs: number;
  quantum_prediction: number;
  lhv_bound: number;
  confidence: { low95: number; high95: number } | null;
  verdict: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details: unknown = null,
  ) {
    super(message);
  }
}

async function request<T>(base: string, method: string, path: string, body?: unknown): Promise<T> {
  const resp = await fetch(base.replace(/\/$/, "") + path, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await resp.text();
  const doc = text ? JSON.parse(text) : null;
  if (!resp.ok) {
    const err = doc ?? {};
    throw new ApiError(resp.status, err.code ?? "error", err.message ?? resp.statusText, err.details);
  }
  return doc as T;
}

export class ExerciseClient {
  constructor(public base: string) {}

  createSession(livesPerSystem: number, seed: number): Promise<SessionInfo> {
    return request<SessionInfo>(this.base, "POST", "/sessions", {
      lives_per_system: livesPerSystem,
      seed,
    });
  }

  getSession(id: string): Promise<SessionInfo> {
    return request<SessionInfo>(this.base, "GET", `/sessions/${id}`);
  }

  deleteSession(id: string): Promise<void> {
    return request<void>(this.base, "DELETE", `/sessions/${id}`);
  }

  playRound(id: string, settingA: number, settingB: number): Promise<RoundResult> {
    return request<RoundResult>(this.base, "POST", `/sessions/${id}/rounds`, {
      setting_a: settingA,
      setting_b: settingB,
    });
  }

  getRound(id: string, index: number): Promise<RoundResult> {
    return request<RoundResult>(this.base, "GET", `/sessions/${id}/rounds/${index}`);
  }

  getSummary(id: string): Promise<Summary> {
    return request<Summary>(this.base, "GET", `/sessions/${id}/summary`);
  }
}
