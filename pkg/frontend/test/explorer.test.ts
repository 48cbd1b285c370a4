import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  ApiClient,
  ApiUnreachableError,
  type DistributionDoc,
  type RecommendationDoc,
  type RecommendationQuery,
} from "../src/api.js";
import {
  DEFAULT_INPUTS,
  ExplorerStore,
  OUTLOOK_TILT,
  OUTLOOKS,
  buildViewModel,
  clampInputs,
  formatDollars,
  type Outlook,
} from "../src/state.js";
import { freePort, mulberry32, startServer, type RunningServer } from "./serveFixture.js";

let server: RunningServer;

beforeAll(async () => {
  server = await startServer();
}, 60_000);

afterAll(async () => {
  await server.stop();
});

/** Fetch the recommendation directly, bypassing the client under test. */
async function fetchRaw(params: Record<string, string>): Promise<RecommendationDoc> {
  const query = new URLSearchParams(params);
  const response = await fetch(`${server.baseUrl}/recommendation?${query}`);
  expect(response.status).toBe(200);
  return (await response.json()) as RecommendationDoc;
}

function parseDollars(text: string): number {
  return Number(text.replace(/,/g, ""));
}

async function freshStore(initial = {}): Promise<ExplorerStore> {
  const store = new ExplorerStore(new ApiClient(server.baseUrl), initial);
  await store.refresh();
  return store;
}

describe("threshold marker", () => {
  it("reads 0.93 at the default threshold on the 2018 non-Valencia fixture", async () => {
    const store = await freshStore();
    const vm = buildViewModel(store.state);
    expect(vm.markerLabel).toBe("0.93");
    expect(vm.markerValue).not.toBeNull();
    expect(Math.abs((vm.markerValue as number) - 0.93)).toBeLessThanOrEqual(0.01);
    expect(vm.scenarioToken).toBe("A_Overestimate");
    expect(vm.positionToken).toBe("Long");
  });

  it("reads 1.00 when the threshold sits below every sample", async () => {
    const store = await freshStore();
    const dist = store.state.distribution as DistributionDoc;
    await store.update({ tau: dist.samples[0] - 1 });
    const vm = buildViewModel(store.state);
    expect(vm.markerLabel).toBe("1.00");
    expect(vm.markerValue).toBe(1);
  });

  it("matches the endpoint to 1e-6 with the threshold exactly on a sample", async () => {
    const store = await freshStore();
    const dist = store.state.distribution as DistributionDoc;
    const tau = dist.samples[400];
    await store.update({ tau });
    const raw = await fetchRaw({
      season: "2018",
      type: "nonvalencia",
      tau: String(tau),
      p_high: String(DEFAULT_INPUTS.pHigh),
      p_low: String(DEFAULT_INPUTS.pLow),
      tilt: OUTLOOK_TILT[DEFAULT_INPUTS.outlook],
    });
    const vm = buildViewModel(store.state);
    expect(Math.abs((vm.markerValue as number) - raw.p_exceed)).toBeLessThanOrEqual(1e-6);
  });
});

describe("single source of truth", () => {
  it("shows exactly the endpoint's numbers for 20 randomized settings", async () => {
    const rng = mulberry32(20260821);
    const store = await freshStore();
    for (let round = 0; round < 20; round++) {
      const nonValencia = rng() < 0.5;
      const season = nonValencia ? 2018 : 2017;
      const orangeType = nonValencia ? "nonvalencia" : "valencia";
      const tau = -8 + 24 * rng();
      const pHigh = 0.5 + 0.49 * rng();
      const pLow = Math.max(0.0, rng() * (pHigh - 0.01));
      const outlook = OUTLOOKS[Math.floor(rng() * OUTLOOKS.length)];

      await store.update({ season, orangeType, tau, pHigh, pLow, outlook });
      const clamped = store.state.inputs;
      const raw = await fetchRaw({
        season: String(season),
        type: orangeType,
        tau: String(tau),
        p_high: String(clamped.pHigh),
        p_low: String(clamped.pLow),
        tilt: OUTLOOK_TILT[outlook],
      });
      const vm = buildViewModel(store.state);

      // displayed strings are the endpoint values at display precision
      expect(vm.pExceedText).toBe(raw.p_exceed.toFixed(3));
      expect(vm.markerLabel).toBe(raw.p_exceed.toFixed(2));
      expect(vm.scenarioToken).toBe(raw.scenario);
      expect(vm.positionToken).toBe(raw.position);
      expect(vm.emvLongText).toBe(formatDollars(raw.emv_long));
      expect(vm.emvShortText).toBe(formatDollars(raw.emv_short));
      // and they round-trip numerically within half a display unit
      expect(Math.abs(parseDollars(vm.emvLongText) - raw.emv_long)).toBeLessThanOrEqual(0.005);
      expect(Math.abs(parseDollars(vm.emvShortText) - raw.emv_short)).toBeLessThanOrEqual(0.005);
      expect(Math.abs(Number(vm.pExceedText) - raw.p_exceed)).toBeLessThanOrEqual(0.0005);
      // tree numbers come from the same response
      expect(vm.treeUpText).toBe(formatDollars(raw.payoffs_used.e_long_per_contract));
      expect(vm.treeDownText).toBe(formatDollars(raw.payoffs_used.e_short_per_contract));
    }
  });
});

describe("roles", () => {
  it("gives each stakeholder the endpoint's wording for scenario A", async () => {
    const store = await freshStore();
    const rec = store.state.recommendation as RecommendationDoc;
    expect(rec.scenario).toBe("A_Overestimate");

    await store.update({ role: "Processor" });
    let vm = buildViewModel(store.state);
    expect(vm.actionText).toBe(rec.actions.processor);
    expect(vm.actionText).toContain("secure supply");
    expect(vm.actionText).toContain("long position");

    await store.update({ role: "Farmer" });
    vm = buildViewModel(store.state);
    expect(vm.actionText).toBe(rec.actions.farmer);

    await store.update({ role: "Trader" });
    vm = buildViewModel(store.state);
    expect(vm.actionText).toBe(rec.position);
    expect(vm.actionText).not.toContain(" ");
  });
});

describe("outlook tilt", () => {
  it("surfaces the advisory in the middle scenario without changing it", async () => {
    const store = await freshStore();
    await store.update({ pHigh: 0.95, outlook: "below_normal" });
    const rec = store.state.recommendation as RecommendationDoc;
    const raw = await fetchRaw({
      season: "2018",
      type: "nonvalencia",
      tau: String(store.state.inputs.tau),
      p_high: "0.95",
      p_low: String(store.state.inputs.pLow),
      tilt: "raises_overestimation",
    });
    expect(raw.flags).toContain("tilt_advisory");
    expect(rec.flags).toEqual(raw.flags);
    const vm = buildViewModel(store.state);
    expect(vm.advisoryVisible).toBe(true);
    expect(vm.scenarioToken).toBe("C_Close");

    await store.update({ outlook: "normal" });
    const calm = buildViewModel(store.state);
    expect(calm.advisoryVisible).toBe(false);
    expect(calm.scenarioToken).toBe("C_Close");
  });

  it("maps every outlook to a tilt the endpoint accepts", async () => {
    const store = await freshStore();
    for (const outlook of OUTLOOKS) {
      await store.update({ outlook });
      expect(store.state.stale).toBe(false);
      expect((store.state.recommendation as RecommendationDoc).tilt).toBe(
        OUTLOOK_TILT[outlook],
      );
    }
  });
});

describe("payoff overrides", () => {
  it("recomputes EMV server-side from overridden payoffs", async () => {
    const store = await freshStore();
    await store.update({ eLong: 1000, eShort: 500 });
    const raw = await fetchRaw({
      season: "2018",
      type: "nonvalencia",
      tau: String(DEFAULT_INPUTS.tau),
      p_high: String(DEFAULT_INPUTS.pHigh),
      p_low: String(DEFAULT_INPUTS.pLow),
      tilt: OUTLOOK_TILT[DEFAULT_INPUTS.outlook],
      e_long: "1000",
      e_short: "500",
    });
    const vm = buildViewModel(store.state);
    expect(vm.overrideActive).toBe(true);
    expect(vm.treeUpText).toBe("1,000.00");
    expect(vm.treeDownText).toBe("500.00");
    expect(vm.emvLongText).toBe(formatDollars(raw.emv_long));
    expect(raw.flags).toContain("payoff_override");
    // p = 0.93 exactly on this fixture: 0.93*1000 - 0.07*500
    expect(Math.abs(raw.emv_long - 895.0)).toBeLessThanOrEqual(1e-9);

    await store.update({ eLong: null, eShort: null });
    const back = buildViewModel(store.state);
    expect(back.overrideActive).toBe(false);
  });

  it("clamps negative overrides to zero before sending", async () => {
    const store = await freshStore();
    await store.update({ eLong: -250 });
    expect(store.state.inputs.eLong).toBe(0);
    expect(store.state.stale).toBe(false);
    const rec = store.state.recommendation as RecommendationDoc;
    expect(rec.payoffs_used.e_long_per_contract).toBe(0);
    expect(rec.payoffs_used.overridden).toBe(true);
  });
});

describe("threshold invariants", () => {
  it("keeps p_low strictly below p_high under adversarial updates", async () => {
    const store = await freshStore();
    await store.update({ pLow: 0.99 });
    expect(store.state.inputs.pLow).toBeLessThan(store.state.inputs.pHigh);
    expect(store.state.stale).toBe(false);

    await store.update({ pHigh: 0.02 });
    expect(store.state.inputs.pHigh).toBeGreaterThan(store.state.inputs.pLow);
    expect(store.state.inputs.pLow).toBeGreaterThanOrEqual(0);
    expect(store.state.stale).toBe(false);
  });

  it("clamp is idempotent over random inputs", () => {
    const rng = mulberry32(7);
    for (let i = 0; i < 200; i++) {
      const once = clampInputs({
        ...DEFAULT_INPUTS,
        pHigh: rng() * 1.4 - 0.2,
        pLow: rng() * 1.4 - 0.2,
        eLong: rng() < 0.3 ? null : rng() * 4000 - 2000,
        eShort: rng() < 0.3 ? null : rng() * 4000 - 2000,
      });
      expect(once.pLow).toBeLessThan(once.pHigh);
      expect(once.pHigh).toBeLessThanOrEqual(1);
      if (once.eLong !== null) expect(once.eLong).toBeGreaterThanOrEqual(0);
      expect(clampInputs(once)).toEqual(once);
    }
  });
});

describe("endpoint loss", () => {
  it("raises the stale badge and disables controls when unreachable", async () => {
    const deadPort = await freePort();
    const store = new ExplorerStore(new ApiClient(`http://127.0.0.1:${deadPort}`));
    await store.refresh();
    const vm = buildViewModel(store.state);
    expect(vm.staleBadgeVisible).toBe(true);
    expect(vm.controlsDisabled).toBe(true);
    expect(store.state.error).toContain("unreachable");
  });

  it("keeps the last good data on screen and recovers on retry", async () => {
    class FlakyClient extends ApiClient {
      fail = false;

      override async fetchDistribution(season: number, type: string) {
        if (this.fail) throw new ApiUnreachableError(new Error("connection refused"));
        return super.fetchDistribution(season, type);
      }

      override async fetchRecommendation(q: RecommendationQuery) {
        if (this.fail) throw new ApiUnreachableError(new Error("connection refused"));
        return super.fetchRecommendation(q);
      }
    }
    const client = new FlakyClient(server.baseUrl);
    const store = new ExplorerStore(client);
    await store.refresh();
    const before = buildViewModel(store.state);
    expect(before.staleBadgeVisible).toBe(false);

    client.fail = true;
    await store.update({ tau: 8 });
    const during = buildViewModel(store.state);
    expect(during.staleBadgeVisible).toBe(true);
    expect(during.controlsDisabled).toBe(true);
    // previous figures stay visible underneath the badge
    expect(during.pExceedText).toBe(before.pExceedText);
    expect(during.emvLongText).toBe(before.emvLongText);

    client.fail = false;
    await store.refresh();
    const after = buildViewModel(store.state);
    expect(after.staleBadgeVisible).toBe(false);
    expect((store.state.recommendation as RecommendationDoc).tau).toBe(8);
  });
});

describe("concurrency", () => {
  it("resolves overlapping requests by last write wins", async () => {
    class DelayedClient extends ApiClient {
      calls = 0;

      override async fetchRecommendation(q: RecommendationQuery) {
        const call = ++this.calls;
        const doc = await super.fetchRecommendation(q);
        if (call === 1) await new Promise((r) => setTimeout(r, 400));
        return doc;
      }
    }
    const store = new ExplorerStore(new DelayedClient(server.baseUrl));
    const slow = store.update({ tau: 5 });
    await new Promise((r) => setTimeout(r, 50));
    const fast = store.update({ tau: 12 });
    await Promise.all([slow, fast]);
    const rec = store.state.recommendation as RecommendationDoc;
    expect(rec.tau).toBe(12);
    const vm = buildViewModel(store.state);
    expect(vm.markerLabel).toBe(rec.p_exceed.toFixed(2));
  });
});
