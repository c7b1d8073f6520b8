// Typed client for the /v1 trial-service API. All protocol constants
// (trial counts, confidence scale, rest cadence, confirmation delay) come
// from the session payload; nothing is hardcoded client-side.

export interface Protocol {
  practice_trials: number;
  test_trials: number;
  total_trials: number;
  num_classes: number;
  confidence_min: number;
  confidence_max: number;
  rest_every: number;
  confirm_advance_ms: number;
}

export interface SessionInfo {
  session_id: string;
  participant_id: string;
  created_at: string;
  cursor: number;
  phase: "practice" | "test" | "done";
  protocol: Protocol;
}

export interface TrialView {
  session_id: string;
  index: number;
  phase: "practice" | "test";
  phase_index: number;
  image_url: string;
  item_id: string;
  class_options: string[];
  show_rest: boolean;
  instructions: string;
  progress: { completed_test: number; total_test: number };
}

export interface Ack {
  stored: boolean;
  index: number;
  phase: string;
  session_phase: string;
  next_index: number | null;
  feedback?: "correct" | "incorrect";
}

export interface ResponseBody {
  choice: string;
  confidence: number;
  rt_ms: number;
  rt_invalid?: boolean;
}

export interface StudyApi {
  createSession(participantId: string, seed?: number): Promise<SessionInfo>;
  getSession(sessionId: string): Promise<SessionInfo>;
  getTrial(sessionId: string, index: number): Promise<TrialView>;
  submitResponse(sessionId: string, index: number, body: ResponseBody): Promise<Ack>;
  fetchImage(imageUrl: string): Promise<string>; // data: URL
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(res: Response): Promise<T> {
  const body = await res.text();
  if (!res.ok) {
    let message = body;
    try {
      message = (JSON.parse(body) as { error?: string }).error ?? body;
    } catch {
      // non-JSON error body, keep raw text
    }
    throw new ApiError(res.status, message);
  }
  return JSON.parse(body) as T;
}

export class ApiClient implements StudyApi {
  constructor(private readonly base: string = "") {}

  createSession(participantId: string, seed?: number): Promise<SessionInfo> {
    return fetch(`${this.base}/v1/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(seed === undefined ? { participant_id: participantId } : { participant_id: participantId, seed }),
    }).then((res) => asJson<SessionInfo>(res));
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return fetch(`${this.base}/v1/sessions/${sessionId}`).then((res) => asJson<SessionInfo>(res));
  }

  getTrial(sessionId: string, index: number): Promise<TrialView> {
    return fetch(`${this.base}/v1/sessions/${sessionId}/trials/${index}`).then((res) =>
      asJson<TrialView>(res),
    );
  }

  submitResponse(sessionId: string, index: number, body: ResponseBody): Promise<Ack> {
    return fetch(`${this.base}/v1/sessions/${sessionId}/trials/${index}/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((res) => asJson<Ack>(res));
  }

  async fetchImage(imageUrl: string): Promise<string> {
    const res = await fetch(`${this.base}${imageUrl}`);
    if (!res.ok) throw new ApiError(res.status, `image fetch failed: ${res.status}`);
    const bytes = new Uint8Array(await res.arrayBuffer());
    let binary = "";
    const chunk = 0x8000;
    for (let i = 0; i < bytes.length; i += chunk) {
      binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
    }
    return `data:image/png;base64,${btoa(binary)}`;
  }
}
