import { describe, expect, it } from "vitest";

import { ApiClient, SessionSnapshot } from "../src/api.js";
import { deriveStatuses, WizardMachine } from "../src/wizard.js";

const CHAIN_3 =
  "P{1,2,3}[L(000),P{1,2}[L(001),P{1,3}[L(010),P{1}[L(011)," +
  "P{2,3}[L(100),P{2}[L(101),P{3}[L(110),L(111)]]]]]]]";

function snapshotAtRoot(): SessionSnapshot {
  return {
    id: "abc123def456",
    n: 3,
    priors: [0.01, 0.17, 0.51],
    strategy: { kind: "optimal" },
    history: [],
    status: "running",
    outcome: null,
    tests_used: 0,
    next_pool: [1, 2, 3],
    expected_remaining: 1.889133,
    remaining_tree: CHAIN_3,
  };
}

function completedSnapshot(): SessionSnapshot {
  return {
    ...snapshotAtRoot(),
    history: [{ pool: [1, 2, 3], result: "negative" }],
    status: "complete",
    outcome: "000",
    tests_used: 1,
    next_pool: null,
    expected_remaining: 0,
    remaining_tree: null,
  };
}

/** Canned server: serves the root snapshot, then the completed one. */
function fakeServer() {
  let current = snapshotAtRoot();
  const calls: string[] = [];
  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    calls.push(`${init?.method ?? "GET"} ${input}`);
    if (input === "/v1/sessions" && init?.method === "POST") {
      return json(200, current);
    }
    if (input.endsWith("/result") && init?.method === "POST") {
      const body = JSON.parse(String(init.body));
      if (body.step !== undefined && body.step !== current.tests_used) {
        return json(409, { error: "stale step" });
      }
      current = completedSnapshot();
      return json(200, current);
    }
    if (input.startsWith("/v1/sessions/") && (!init || !init.method || init.method === "GET")) {
      return json(200, current);
    }
    if (init?.method === "DELETE") {
      return json(200, { deleted: current.id });
    }
    return json(404, { error: `unhandled ${input}` });
  };
  return { fetchImpl, calls, snapshot: () => current };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("WizardMachine", () => {
  it("mirrors the server snapshot through a full run", async () => {
    const server = fakeServer();
    const wizard = new WizardMachine(new ApiClient("", server.fetchImpl));

    await wizard.start([0.01, 0.17, 0.51]);
    expect(wizard.state.phase).toBe("running");
    expect(wizard.state.snapshot).toEqual(server.snapshot());
    expect(wizard.state.snapshot!.next_pool).toEqual([1, 2, 3]);
    expect(wizard.state.statuses).toEqual(["unknown", "unknown", "unknown"]);

    await wizard.answer("negative");
    expect(wizard.state.phase).toBe("complete");
    expect(wizard.state.snapshot).toEqual(server.snapshot());
    expect(wizard.state.statuses).toEqual(["clean", "clean", "clean"]);
    expect(wizard.state.snapshot!.tests_used).toBe(1);
    expect(wizard.state.log.some((line) => line.includes("1 tests used"))).toBe(true);

    // completed sessions accept no further answers, without a server call
    const callsBefore = server.calls.length;
    await wizard.answer("positive");
    expect(server.calls.length).toBe(callsBefore);
  });

  it("sends the step guard with every result", async () => {
    const server = fakeServer();
    const wizard = new WizardMachine(new ApiClient("", server.fetchImpl));
    await wizard.start([0.01, 0.17, 0.51]);
    await wizard.answer("negative");
    const resultCall = server.calls.find((line) => line.includes("/result"));
    expect(resultCall).toBeDefined();
  });

  it("refreshes after a conflict instead of failing", async () => {
    const server = fakeServer();
    const wizard = new WizardMachine(new ApiClient("", server.fetchImpl));
    await wizard.start([0.01, 0.17, 0.51]);
    // another client wins the race
    wizard.state = {
      ...wizard.state,
      snapshot: { ...wizard.state.snapshot!, tests_used: 3 },
    };
    await wizard.answer("negative");
    expect(wizard.state.phase).not.toBe("error");
    expect(wizard.state.snapshot).toEqual(server.snapshot());
  });

  it("surfaces API errors with retry left to the user", async () => {
    const failing = async () => json(500, { error: "boom" });
    const wizard = new WizardMachine(new ApiClient("", failing));
    await wizard.start([0.5]);
    expect(wizard.state.phase).toBe("error");
    expect(wizard.state.error).toContain("boom");
  });
});

describe("deriveStatuses", () => {
  it("uses the outcome once complete", () => {
    expect(deriveStatuses(completedSnapshot())).toEqual(["clean", "clean", "clean"]);
  });

  it("derives decided samples from the remaining tree", () => {
    const snapshot = {
      ...snapshotAtRoot(),
      remaining_tree: "P{2}[L(100),L(110)]",
    };
    expect(deriveStatuses(snapshot)).toEqual(["infected", "unknown", "clean"]);
  });

  it("falls back to unknown without a materialized tree", () => {
    const snapshot = { ...snapshotAtRoot(), remaining_tree: null };
    expect(deriveStatuses(snapshot)).toEqual(["unknown", "unknown", "unknown"]);
  });
});
