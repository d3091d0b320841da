/**
 * Typed client for the advisor HTTP API (/api/v1).
 *
 * The console performs no physics: every number rendered downstream comes
 * from a response field validated here.  `fetch` and `sleep` are injectable
 * so tests can drive the client without a network or real timers.
 */
import { z } from "zod";

export const API_PREFIX = "/api/v1";
export const JOB_POLL_MS = 1000;

// ---------------------------------------------------------------------------
// response schemas

export const BranchSchema = z.object({
  id: z.number().int(),
  from: z.number().int(),
  to: z.number().int(),
  rating_mw: z.number(),
});

export const BusSchema = z.object({
  id: z.number().int(),
  demand_mw: z.number(),
  priority: z.number(),
});

export const CaseSchema = z.object({
  id: z.string(),
  n_buses: z.number().int(),
  n_branches: z.number().int(),
  total_demand_mw: z.number(),
  branches: z.array(BranchSchema),
  buses: z.array(BusSchema),
});

export const EventSchema = z.object({
  time: z.number(),
  kind: z.string(),
  subject: z.number(),
  magnitude: z.number(),
});

export const TraceSchema = z.object({
  policy: z.string(),
  states: z.array(z.array(z.number())),
  served: z.array(z.array(z.number())),
  load_bits: z.array(z.array(z.number())),
  demand: z.array(z.number()),
  blackout: z.boolean(),
  events: z.array(EventSchema),
  loss: z.object({ grid: z.number(), consumer: z.number() }),
  resilience: z.object({ r: z.number() }).optional(),
});

export const JobSchema = z.object({
  id: z.string(),
  status: z.enum(["queued", "running", "done", "error"]),
  result: z.record(z.unknown()).optional(),
  error: z.object({ code: z.string(), message: z.string() }).optional(),
});

export const PredictSchema = z.object({
  kind: z.enum(["link", "load"]),
  mode: z.string().optional(),
  states: z.array(z.array(z.number())).optional(),
  probabilities: z.array(z.number()).optional(),
  binarized: z.array(z.number()).optional(),
});

export const WhatIfPointSchema = z.object({
  delta_w: z.number(),
  r: z.number(),
  r_grid: z.number(),
  r_consumer: z.number(),
  blackout: z.boolean(),
});

export const WhatIfSchema = z.object({
  grid: z.array(z.number()),
  curves: z.record(z.array(WhatIfPointSchema)),
});

export const CriticalitySchema = z.object({
  c_d: z.array(z.number()),
  c_e: z.array(z.number()),
  ranking: z.array(z.number().int()),
});

export type CaseInfo = z.infer<typeof CaseSchema>;
export type Trace = z.infer<typeof TraceSchema>;
export type Job = z.infer<typeof JobSchema>;
export type WhatIfResult = z.infer<typeof WhatIfSchema>;
export type WhatIfPoint = z.infer<typeof WhatIfPointSchema>;
export type CriticalityResult = z.infer<typeof CriticalitySchema>;
export type PredictResult = z.infer<typeof PredictSchema>;

export interface ScenarioRequest {
  case: string;
  loading_multiplier: number;
  wind_fraction: number;
  wind_reduction: number;
  initial_contingencies: number[];
  policy: string;
}

export interface WhatIfRequest {
  case: string;
  loading_multiplier: number;
  wind_fraction: number;
  initial_contingencies: number[];
  policies: string[];
  grid: number[];
}

// ---------------------------------------------------------------------------
// errors and staleness

/** Error envelope `{code, message, detail}` raised for non-2xx responses. */
export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public detail: unknown = null,
    public status = 0,
  ) {
    super(message);
  }
}

/**
 * Discards stale responses: each request takes a ticket, and only the
 * response matching the latest ticket is accepted.
 */
export class SequenceGate {
  private issued = 0;
  private latest = 0;

  next(): number {
    this.latest = ++this.issued;
    return this.latest;
  }

  accept(ticket: number): boolean {
    return ticket === this.latest;
  }
}

// ---------------------------------------------------------------------------
// client

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
type SleepLike = (ms: number) => Promise<void>;

const realSleep: SleepLike = (ms) => new Promise((ok) => setTimeout(ok, ms));

export class AdvisorClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
    private sleep: SleepLike = realSleep,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + API_PREFIX + path, init);
    } catch (exc) {
      throw new ApiError("network", `advisor unreachable: ${String(exc)}`);
    }
    if (!resp.ok) {
      let envelope: { code?: string; message?: string; detail?: unknown } = {};
      try {
        envelope = (await resp.json()) as typeof envelope;
      } catch {
        // non-JSON error body: fall through to the generic envelope
      }
      throw new ApiError(
        envelope.code ?? "http_error",
        envelope.message ?? resp.statusText,
        envelope.detail ?? null,
        resp.status,
      );
    }
    return resp.json();
  }

  private post(path: string, body: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async listCases(): Promise<CaseInfo[]> {
    return z.array(CaseSchema).parse(await this.request("/cases"));
  }

  async simulate(req: ScenarioRequest): Promise<Trace> {
    return TraceSchema.parse(await this.post("/simulate", req));
  }

  async createPool(body: Record<string, unknown>): Promise<string> {
    const doc = z.object({ job_id: z.string() }).parse(await this.post("/pools", body));
    return doc.job_id;
  }

  async trainModel(pool: string, target: "link" | "load"): Promise<string> {
    const doc = z
      .object({ job_id: z.string() })
      .parse(await this.post("/models", { pool, target }));
    return doc.job_id;
  }

  async getJob(jobId: string): Promise<Job> {
    return JobSchema.parse(await this.request(`/jobs/${jobId}`));
  }

  /** Polls at 1 s intervals until the job is done; rejects on job error. */
  async waitForJob(jobId: string, maxPolls = 600): Promise<Job> {
    for (let k = 0; k < maxPolls; k++) {
      const job = await this.getJob(jobId);
      if (job.status === "done") return job;
      if (job.status === "error") {
        throw new ApiError(job.error?.code ?? "job_failed", job.error?.message ?? "job failed");
      }
      await this.sleep(JOB_POLL_MS);
    }
    throw new ApiError("job_timeout", `job ${jobId} still running after ${maxPolls} polls`);
  }

  async predict(modelId: string, state: number[], mode = "next"): Promise<PredictResult> {
    return PredictSchema.parse(
      await this.post("/predict", { model_id: modelId, state, mode }),
    );
  }

  async matrixCsv(modelId: string, name: string): Promise<string> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(
        `${this.baseUrl}${API_PREFIX}/models/${modelId}/matrices?name=${name}`,
      );
    } catch (exc) {
      throw new ApiError("network", `advisor unreachable: ${String(exc)}`);
    }
    if (!resp.ok) throw new ApiError("matrix_not_found", `no matrix ${name}`, null, resp.status);
    return resp.text();
  }

  async criticality(linkModel: string, loadModel: string): Promise<CriticalityResult> {
    return CriticalitySchema.parse(
      await this.request(`/criticality?link_model=${linkModel}&load_model=${loadModel}`),
    );
  }

  async whatIf(req: WhatIfRequest): Promise<WhatIfResult> {
    return WhatIfSchema.parse(await this.post("/whatif", req));
  }
}

/** Parses a matrix CSV export into rows of numbers (no reshaping). */
export function parseMatrixCsv(text: string): number[][] {
  return text
    .trim()
    .split("\n")
    .filter((line) => line.length > 0 && !line.startsWith("#"))
    .map((line) => line.split(",").map(Number));
}
