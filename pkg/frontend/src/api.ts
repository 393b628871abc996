/**
 * Typed client for the session REST API. Every number the UI shows comes
 * straight from these response payloads; the client never computes
 * probabilities or logits itself.
 */

export interface HistoryEntry {
  index: number;
  old: string;
  new: string;
  generator: string;
}

export interface SessionState {
  session_id: string;
  tokens: string[];
  y: string;
  prediction: string;
  probabilities: Record<string, number>;
  logits: Record<string, number>;
  history_len: number;
  history: HistoryEntry[];
}

export interface ImportanceEntry {
  index: number;
  token: string;
  score: number;
  pre_label: string;
  post_label: string;
}

export interface CandidateEntry {
  token: string;
  score: number;
  generator: string;
  o_y_after: number;
  probability_after: number;
  prediction_after: string;
  logits_after: Record<string, number>;
}

export interface GeneratorInfo {
  available: boolean;
  reason: string | null;
}

export interface MetaInfo {
  labels: string[];
  generators: Record<string, GeneratorInfo>;
  model: { kind: string; role: string; n_features: number } | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `server unreachable: ${String(err)}`);
  }
  let payload: unknown = null;
  try {
    payload = await response.json();
  } catch {
    // tolerated: error responses may carry no body
  }
  if (!response.ok) {
    const detail =
      payload && typeof payload === "object" && "error" in payload
        ? String((payload as { error: unknown }).error)
        : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return payload as T;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class Client {
  constructor(private readonly base: string = "") {}

  meta(): Promise<MetaInfo> {
    return request<MetaInfo>(`${this.base}/v1/meta`);
  }

  createSession(text: string, y: string): Promise<SessionState> {
    return request<SessionState>(`${this.base}/v1/sessions`, post({ text, y }));
  }

  getState(sessionId: string): Promise<SessionState> {
    return request<SessionState>(`${this.base}/v1/sessions/${sessionId}`);
  }

  importance(sessionId: string): Promise<{ scores: ImportanceEntry[] }> {
    return request(`${this.base}/v1/sessions/${sessionId}/importance`);
  }

  candidates(
    sessionId: string,
    index: number,
    generator: string,
    topK: number,
  ): Promise<{ candidates: CandidateEntry[] }> {
    const query = `index=${index}&generator=${encodeURIComponent(generator)}&top_k=${topK}`;
    return request(`${this.base}/v1/sessions/${sessionId}/candidates?${query}`);
  }

  apply(sessionId: string, index: number, token: string): Promise<SessionState> {
    return request<SessionState>(
      `${this.base}/v1/sessions/${sessionId}/apply`,
      post({ index, token }),
    );
  }

  revert(sessionId: string): Promise<SessionState> {
    return request<SessionState>(`${this.base}/v1/sessions/${sessionId}/revert`, post({}));
  }
}
