import { describe, expect, it } from "vitest";

import {
  AdvisorClient,
  ApiError,
  SequenceGate,
  parseMatrixCsv,
} from "../src/api";

type Handler = (url: string, init?: RequestInit) => { status: number; body: unknown };

function mockClient(handler: Handler, sleeps: number[] = []) {
  const fetchImpl = async (url: string, init?: RequestInit) => {
    const { status, body } = handler(url, init);
    return {
      ok: status >= 200 && status < 300,
      status,
      statusText: String(status),
      json: async () => body,
      text: async () => String(body),
    } as Response;
  };
  const sleep = async (ms: number) => {
    sleeps.push(ms);
  };
  return new AdvisorClient("", fetchImpl, sleep);
}

const TRACE = {
  policy: "exp1",
  states: [
    [1, 1, 0],
    [1, 0, 0],
  ],
  served: [
    [10, 20],
    [10, 15],
  ],
  load_bits: [
    [1, 1],
    [1, 1],
  ],
  demand: [10, 20],
  blackout: false,
  events: [{ time: 0, kind: "line_trip", subject: 3, magnitude: 0 }],
  loss: { grid: 1.25, consumer: 4.5 },
};

describe("AdvisorClient", () => {
  it("parses a simulate response", async () => {
    const client = mockClient((url, init) => {
      expect(url).toBe("/api/v1/simulate");
      expect(init?.method).toBe("POST");
      return { status: 200, body: TRACE };
    });
    const trace = await client.simulate({
      case: "ieee30",
      loading_multiplier: 1.5,
      wind_fraction: 0,
      wind_reduction: 0,
      initial_contingencies: [5, 9],
      policy: "exp1",
    });
    // values pass through the client untouched
    expect(trace.loss.grid).toBe(1.25);
    expect(trace.states[1]).toEqual([1, 0, 0]);
  });

  it("raises ApiError from the error envelope", async () => {
    const client = mockClient(() => ({
      status: 422,
      body: { code: "invalid_scenario", message: "bad loading", detail: null },
    }));
    const err = await client
      .simulate({
        case: "ieee30",
        loading_multiplier: 9,
        wind_fraction: 0,
        wind_reduction: 0,
        initial_contingencies: [1, 2],
        policy: "exp1",
      })
      .then(
        () => null,
        (exc: unknown) => exc,
      );
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("invalid_scenario");
    expect((err as ApiError).status).toBe(422);
  });

  it("wraps network failures without crashing", async () => {
    const client = new AdvisorClient("", async () => {
      throw new Error("connection refused");
    });
    await expect(client.listCases()).rejects.toMatchObject({ code: "network" });
  });

  it("rejects responses that do not match the schema", async () => {
    const client = mockClient(() => ({ status: 200, body: { nope: true } }));
    await expect(
      client.simulate({
        case: "ieee30",
        loading_multiplier: 1,
        wind_fraction: 0,
        wind_reduction: 0,
        initial_contingencies: [1, 2],
        policy: "exp1",
      }),
    ).rejects.toThrow();
  });

  it("polls jobs at 1 s intervals until done", async () => {
    let calls = 0;
    const sleeps: number[] = [];
    const client = mockClient((url) => {
      expect(url).toBe("/api/v1/jobs/abc");
      calls += 1;
      const status = calls < 3 ? "running" : "done";
      return { status: 200, body: { id: "abc", status, result: { model_id: "m1" } } };
    }, sleeps);
    const job = await client.waitForJob("abc");
    expect(job.status).toBe("done");
    expect(job.result).toEqual({ model_id: "m1" });
    expect(sleeps).toEqual([1000, 1000]);
  });

  it("surfaces job errors to the caller", async () => {
    const client = mockClient(() => ({
      status: 200,
      body: { id: "abc", status: "error", error: { code: "job_failed", message: "boom" } },
    }));
    await expect(client.waitForJob("abc")).rejects.toMatchObject({ code: "job_failed" });
  });

  it("fetches criticality with both model ids", async () => {
    const client = mockClient((url) => {
      expect(url).toBe("/api/v1/criticality?link_model=aaa&load_model=bbb");
      return { status: 200, body: { c_d: [0.5, 1], c_e: [0, 0.2], ranking: [2, 1] } };
    });
    const crit = await client.criticality("aaa", "bbb");
    expect(crit.ranking).toEqual([2, 1]);
  });
});

describe("SequenceGate", () => {
  it("accepts only the most recent ticket", () => {
    const gate = new SequenceGate();
    const first = gate.next();
    const second = gate.next();
    expect(gate.accept(first)).toBe(false); // stale response dropped
    expect(gate.accept(second)).toBe(true);
    const third = gate.next();
    expect(gate.accept(second)).toBe(false);
    expect(gate.accept(third)).toBe(true);
  });
});

describe("parseMatrixCsv", () => {
  it("parses rows and skips comment headers", () => {
    const rows = parseMatrixCsv("# d\n0.5,0.25\n0.5,0.75\n");
    expect(rows).toEqual([
      [0.5, 0.25],
      [0.5, 0.75],
    ]);
  });
});
