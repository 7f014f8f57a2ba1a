import { spawnSync } from "node:child_process";
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { PolicyClient } from "../src/api.js";
import { impliedInnovation, mulberry32, sampleInnovation, Session } from "../src/session.js";
import { SERVICE_URL } from "./setup.js";

const workDir = () => {
  const dir = process.env.ASR_CONSOLE_WORKDIR;
  if (!dir) {
    throw new Error("ASR_CONSOLE_WORKDIR not set (globalSetup did not run)");
  }
  return dir;
};
const cubePath = () => join(workDir(), "cube.bin");

interface TrajectoryRow {
  day: number;
  S: number;
  A: number;
  q: number;
  order: number;
  X: number;
  exercised: boolean;
}

function parseTrajectory(csv: string): TrajectoryRow[] {
  const [header, ...lines] = csv.trim().split("\n");
  expect(header).toBe("day,S,A,q,order,X,exercised");
  return lines.map((line) => {
    const [day, S, A, q, order, X, exercised] = line.split(",");
    return {
      day: Number(day),
      S: Number(S),
      A: Number(A),
      q: Number(q),
      order: Number(order),
      X: Number(X),
      exercised: exercised === "1",
    };
  });
}

function runSimulator(label: string, prices: number[]): TrajectoryRow[] {
  const dir = join(workDir(), `sim-${label}`);
  mkdirSync(dir, { recursive: true });
  const pathCsv = join(dir, "path.csv");
  writeFileSync(
    pathCsv,
    "day,price\n" + prices.map((p, i) => `${i + 1},${p}`).join("\n") + "\n",
  );
  const run = spawnSync(
    "asr",
    ["simulate", "--cube", cubePath(), "--path", pathCsv, "--out-dir", dir],
    { encoding: "utf-8" },
  );
  expect(run.status, run.stderr).toBe(0);
  return parseTrajectory(readFileSync(join(dir, "trajectory.csv"), "utf-8"));
}

async function driveSession(prices: number[]): Promise<Session> {
  const session = new Session(new PolicyClient(SERVICE_URL));
  const connected = await session.connect();
  expect(connected.status).toBe("active");
  for (const price of prices) {
    const snap = await session.stepDay(price);
    if (snap.status === "settled") {
      break;
    }
    expect(snap.banner).toBeNull();
  }
  return session;
}

const N = 12;
const downPath = Array.from({ length: N }, (_, i) => 45.0 - 0.45 * (i + 1));
const upPath = Array.from({ length: N }, (_, i) => 45.0 + 0.3 * (i + 1));

describe("desk console against the live policy service", () => {
  it("replays the identical order/exercise sequence as the simulator (down path)", async () => {
    const want = runSimulator("down", downPath);
    const session = await driveSession(downPath);
    const snap = session.snapshot();
    expect(snap.status).toBe("settled");
    const got = session.snapshot().history;
    expect(got.length).toBe(want.length);
    for (let i = 0; i < want.length; i++) {
      expect(got[i].day).toBe(want[i].day);
      expect(got[i].order).toBeCloseTo(want[i].order, 4);
      expect(got[i].exercised).toBe(want[i].exercised);
      expect(Math.abs(got[i].q - want[i].q)).toBeLessThan(1e-3);
      expect(Math.abs(got[i].X - want[i].X)).toBeLessThan(1e-2);
    }
    expect(snap.settlement).not.toBeNull();
    expect(snap.settlement!.day).toBe(want[want.length - 1].day);
  });

  it("replays the identical sequence on an up path that runs to maturity", async () => {
    const want = runSimulator("up", upPath);
    const session = await driveSession(upPath);
    const snap = session.snapshot();
    expect(snap.status).toBe("settled");
    expect(snap.settlement!.day).toBe(N);
    const got = snap.history;
    expect(got.length).toBe(want.length);
    for (let i = 0; i < want.length; i++) {
      expect(got[i].order).toBeCloseTo(want[i].order, 4);
      expect(got[i].exercised).toBe(want[i].exercised);
    }
  });

  it("committed history replays to the displayed state through /preview", async () => {
    const session = await driveSession(upPath.slice(0, 4));
    const snap = session.snapshot();
    const client = new PolicyClient(SERVICE_URL);
    const meta = await client.meta();
    let state = { n: 0, S: meta.market.S0, q: 0, A: meta.market.S0, X: 0 };
    for (let i = 0; i < snap.history.length; i++) {
      const row = snap.history[i];
      const next = i + 1 < snap.history.length ? snap.history[i + 1].S : snap.state.S;
      const eps = impliedInnovation(meta, row.S, next);
      const preview = await client.preview(state, row.order, eps);
      state = preview.state;
    }
    expect(state.n).toBe(snap.state.n);
    expect(state.q).toBeCloseTo(snap.state.q, 6);
    expect(state.A).toBeCloseTo(snap.state.A, 9);
    expect(state.X).toBeCloseTo(snap.state.X, 4);
  });

  it("what-if previews never mutate committed state", async () => {
    const session = await driveSession(upPath.slice(0, 3));
    const before = JSON.stringify(session.snapshot());
    const branches = await session.whatIf([0, 250_000], [-2, 0, 2]);
    expect(branches.length).toBe(6);
    expect(JSON.stringify(session.snapshot())).toBe(before);

    const zero = branches.filter((b) => b.order === 0);
    for (const b of zero) {
      // a zero order moves only the price and the average
      expect(b.next.q).toBeCloseTo(session.snapshot().state.q, 9);
      expect(b.next.X).toBeCloseTo(session.snapshot().state.X, 6);
    }
    const flat = branches.find((b) => b.order === 0 && b.eps === 0);
    expect(flat?.next.S).toBeCloseTo(session.snapshot().state.S, 9);
  });

  it("symmetric innovation previews straddle the committed value", async () => {
    const session = await driveSession(upPath.slice(0, 2));
    const snap = session.snapshot();
    const reco = snap.recommendation!;
    const branches = await session.whatIf([reco.order], [-2, 2]);
    expect(branches.length).toBe(2);
    const values = branches.map((b) => b.theta!).sort((a, b) => a - b);
    const margin = 0.02 * Math.abs(reco.theta) + 1e6;
    expect(values[0] - margin).toBeLessThanOrEqual(reco.theta);
    expect(reco.theta).toBeLessThanOrEqual(values[1] + margin);
  });

  it("keeps state and shows a banner when the service is unreachable", async () => {
    const dead = new Session(new PolicyClient("http://127.0.0.1:59999"));
    const snap = await dead.connect();
    expect(snap.status).toBe("error");
    expect(snap.banner).toContain("unreachable");

    const live = await driveSession(upPath.slice(0, 2));
    const before = live.snapshot();
    // point the same session's client at a dead port via a fresh instance
    const broken = new Session(new PolicyClient("http://127.0.0.1:59999"));
    await broken.connect();
    expect(broken.snapshot().status).toBe("error");
    expect(live.snapshot().day).toBe(before.day);
  });

  it("exports the simulator's trajectory CSV format", async () => {
    const session = await driveSession(downPath);
    const csv = session.exportCsv();
    expect(csv.split("\n")[0]).toBe("day,S,A,q,order,X,exercised");
    const rows = parseTrajectory(csv);
    expect(rows[rows.length - 1].exercised).toBe(true);
  });

  it("innovation sampler matches the five-point law boundaries", () => {
    expect(sampleInnovation(0.0)).toBe(-2);
    expect(sampleInnovation(0.1)).toBe(-1);
    expect(sampleInnovation(0.5)).toBe(0);
    expect(sampleInnovation(0.8)).toBe(1);
    expect(sampleInnovation(0.99)).toBe(2);
    const rng = mulberry32(7);
    const draws = Array.from({ length: 5000 }, () => sampleInnovation(rng()));
    const mean = draws.reduce((a, b) => a + b, 0) / draws.length;
    expect(Math.abs(mean)).toBeLessThan(0.08);
  });
});
