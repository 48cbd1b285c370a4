/** Explorer state: user inputs plus the endpoint documents derived from
 * them.
 *
 * The store is a thin steering layer. On every input change it asks the
 * recommendation endpoint to recompute and replaces the derived state
 * wholesale, so the displayed scenario, position, probability, and EMV
 * values are always the server's. Responses that arrive out of order are
 * discarded: only the newest issued request may apply (last write wins).
 */

import {
  ApiClient,
  type DistributionDoc,
  type RecommendationDoc,
} from "./api.js";

export type Role = "Farmer" | "Processor" | "Trader";

export type Outlook = "above_normal" | "normal" | "below_normal" | "equal_chances";

export const ROLES: Role[] = ["Farmer", "Processor", "Trader"];

export const OUTLOOKS: Outlook[] = [
  "above_normal",
  "normal",
  "below_normal",
  "equal_chances",
];

/** Outlook category to tilt token, for a predictor whose fitted effect
 * on the percent error is positive (more cold raises overestimation),
 * matching the pipeline's default reading. The endpoint interprets the
 * tilt; the UI only picks the token. */
export const OUTLOOK_TILT: Record<Outlook, string> = {
  above_normal: "lowers_overestimation",
  normal: "no_tilt",
  below_normal: "raises_overestimation",
  equal_chances: "unknown",
};

/** Smallest allowed separation between the two probability thresholds. */
export const THRESHOLD_GAP = 0.005;

export interface ExplorerInputs {
  season: number;
  orangeType: string;
  tau: number;
  pHigh: number;
  pLow: number;
  role: Role;
  outlook: Outlook;
  /** Optional what-if payoff magnitudes, dollars per contract. */
  eLong: number | null;
  eShort: number | null;
}

export interface ExplorerState {
  inputs: ExplorerInputs;
  distribution: DistributionDoc | null;
  recommendation: RecommendationDoc | null;
  /** True when the endpoint could not be reached or answered an error;
   * whatever is on screen is then left over from an earlier request. */
  stale: boolean;
  loading: boolean;
  error: string | null;
}

export const DEFAULT_INPUTS: ExplorerInputs = {
  season: 2018,
  orangeType: "nonvalencia",
  tau: 5.0,
  pHigh: 0.9,
  pLow: 0.1,
  role: "Farmer",
  outlook: "normal",
  eLong: null,
  eShort: null,
};

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}

/** Enforce 0 <= p_low < p_high <= 1 and nonnegative payoff overrides.
 * The high threshold wins when the two collide. */
export function clampInputs(inputs: ExplorerInputs): ExplorerInputs {
  const pHigh = clamp(inputs.pHigh, THRESHOLD_GAP, 1.0);
  const pLow = clamp(inputs.pLow, 0.0, pHigh - THRESHOLD_GAP);
  const eLong = inputs.eLong === null ? null : Math.max(0, inputs.eLong);
  const eShort = inputs.eShort === null ? null : Math.max(0, inputs.eShort);
  return { ...inputs, pHigh, pLow, eLong, eShort };
}

/** Dollar amounts as printed by the pipeline: thousands separators, two
 * decimals. */
export function formatDollars(value: number): string {
  return new Intl.NumberFormat("en-US", {
    minimumFractionDigits: 2,
    maximumFractionDigits: 2,
  }).format(value);
}

/** Probability on the scenario card, three decimals. */
export function formatProbability(p: number): string {
  return p.toFixed(3);
}

/** Probability on the draggable threshold marker, two decimals. */
export function formatMarkerLabel(p: number): string {
  return p.toFixed(2);
}

export type Listener = (state: ExplorerState) => void;

export class ExplorerStore {
  private readonly api: ApiClient;
  private seq = 0;
  private appliedSeq = 0;
  private listeners: Listener[] = [];
  state: ExplorerState;

  constructor(api: ApiClient, initial: Partial<ExplorerInputs> = {}) {
    this.api = api;
    this.state = {
      inputs: clampInputs({ ...DEFAULT_INPUTS, ...initial }),
      distribution: null,
      recommendation: null,
      stale: false,
      loading: false,
      error: null,
    };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private setState(patch: Partial<ExplorerState>): void {
    this.state = { ...this.state, ...patch };
    this.emit();
  }

  /** Apply input changes and recompute the derived state remotely. */
  async update(patch: Partial<ExplorerInputs>): Promise<void> {
    const inputs = clampInputs({ ...this.state.inputs, ...patch });
    this.setState({ inputs });
    await this.refresh();
  }

  /** Re-request both documents for the current inputs. */
  async refresh(): Promise<void> {
    const mySeq = ++this.seq;
    const { inputs } = this.state;
    this.setState({ loading: true });

    const needDistribution =
      this.state.distribution === null ||
      this.state.distribution.season_year !== inputs.season ||
      this.state.distribution.orange_type.toLowerCase().replace(/[_-]/g, "") !==
        inputs.orangeType.toLowerCase().replace(/[_-]/g, "");

    try {
      const [distribution, recommendation] = await Promise.all([
        needDistribution
          ? this.api.fetchDistribution(inputs.season, inputs.orangeType)
          : Promise.resolve(this.state.distribution as DistributionDoc),
        this.api.fetchRecommendation({
          season: inputs.season,
          type: inputs.orangeType,
          tau: inputs.tau,
          pHigh: inputs.pHigh,
          pLow: inputs.pLow,
          tilt: OUTLOOK_TILT[inputs.outlook],
          eLong: inputs.eLong,
          eShort: inputs.eShort,
        }),
      ]);
      if (mySeq <= this.appliedSeq) return; // a newer request already landed
      this.appliedSeq = mySeq;
      this.setState({
        distribution,
        recommendation,
        stale: false,
        loading: this.seq !== mySeq ? this.state.loading : false,
        error: null,
      });
    } catch (err) {
      if (mySeq <= this.appliedSeq) return;
      this.appliedSeq = mySeq;
      this.setState({
        stale: true,
        loading: false,
        error: err instanceof Error ? err.message : String(err),
      });
    }
  }
}

/** Everything the page renders, as final display strings. Each value is
 * lifted verbatim (or number-formatted) from an endpoint document; the
 * view model never does decision arithmetic. */
export interface ViewModel {
  seasonLabel: string;
  markerLabel: string;
  markerValue: number | null;
  pExceedText: string;
  scenarioToken: string;
  positionToken: string;
  emvLongText: string;
  emvShortText: string;
  actionText: string;
  rationaleText: string;
  advisoryVisible: boolean;
  overrideActive: boolean;
  treeProbabilityText: string;
  treeUpText: string;
  treeDownText: string;
  pointEstimateText: string;
  staleBadgeVisible: boolean;
  controlsDisabled: boolean;
  loading: boolean;
  errorText: string;
}

const EMPTY = "—";

export function buildViewModel(state: ExplorerState): ViewModel {
  const rec = state.recommendation;
  const dist = state.distribution;
  const role = state.inputs.role;

  let actionText = EMPTY;
  if (rec !== null) {
    if (role === "Farmer") actionText = rec.actions.farmer;
    else if (role === "Processor") actionText = rec.actions.processor;
    else actionText = rec.position;
  }

  return {
    seasonLabel:
      dist === null ? EMPTY : `${dist.orange_type} ${dist.season_year}`,
    markerLabel: rec === null ? EMPTY : formatMarkerLabel(rec.p_exceed),
    markerValue: rec === null ? null : rec.p_exceed,
    pExceedText: rec === null ? EMPTY : formatProbability(rec.p_exceed),
    scenarioToken: rec === null ? EMPTY : rec.scenario,
    positionToken: rec === null ? EMPTY : rec.position,
    emvLongText: rec === null ? EMPTY : formatDollars(rec.emv_long),
    emvShortText: rec === null ? EMPTY : formatDollars(rec.emv_short),
    actionText,
    rationaleText: rec === null ? "" : rec.rationale,
    advisoryVisible: rec !== null && rec.flags.includes("tilt_advisory"),
    overrideActive: rec !== null && rec.payoffs_used.overridden,
    treeProbabilityText: rec === null ? EMPTY : formatProbability(rec.p_exceed),
    treeUpText:
      rec === null ? EMPTY : formatDollars(rec.payoffs_used.e_long_per_contract),
    treeDownText:
      rec === null ? EMPTY : formatDollars(rec.payoffs_used.e_short_per_contract),
    pointEstimateText:
      dist === null ? EMPTY : `${dist.point_estimate.toFixed(3)}%`,
    staleBadgeVisible: state.stale,
    controlsDisabled: state.stale,
    loading: state.loading,
    errorText: state.error ?? "",
  };
}
