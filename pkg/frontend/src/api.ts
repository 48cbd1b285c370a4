/** Typed client for the read-only forecast artifact endpoints.
 *
 * Every number shown in the explorer comes from these responses; the
 * client never derives probabilities or expected values on its own.
 */

export interface DistributionDoc {
  model_id: string;
  season_year: number;
  orange_type: string;
  point_estimate: number;
  B: number;
  seed: number;
  samples: number[];
  tilt: string;
  degenerate: boolean;
}

export interface PayoffsDoc {
  orange_type: string;
  e_long_cents_per_lb: number;
  e_short_cents_per_lb: number;
  e_long_per_contract: number;
  e_short_per_contract: number;
  n_positive_years: number;
  n_negative_years: number;
  b: number;
  seed: number;
  contract_lbs: number;
}

export interface PayoffsUsed {
  e_long_per_contract: number;
  e_short_per_contract: number;
  overridden: boolean;
}

export interface RecommendationDoc {
  scenario: string;
  position: string;
  p_exceed: number;
  tau: number;
  emv_long: number;
  emv_short: number;
  tilt: string;
  actions: { farmer: string; processor: string };
  rationale: string;
  flags: string[];
  season_year: number;
  orange_type: string;
  payoffs_used: PayoffsUsed;
}

export interface RecommendationQuery {
  season: number;
  type: string;
  tau: number;
  pHigh: number;
  pLow: number;
  tilt: string | null;
  eLong: number | null;
  eShort: number | null;
}

/** Endpoint returned a non-2xx status; carries the server's message. */
export class ApiHttpError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiHttpError";
    this.status = status;
  }
}

/** Endpoint could not be reached at all (connection refused, DNS, abort). */
export class ApiUnreachableError extends Error {
  constructor(cause: unknown) {
    super(`endpoint unreachable: ${cause instanceof Error ? cause.message : String(cause)}`);
    this.name = "ApiUnreachableError";
  }
}

async function getJson(url: string): Promise<unknown> {
  let response: Response;
  try {
    response = await fetch(url, { method: "GET" });
  } catch (err) {
    throw new ApiUnreachableError(err);
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // fall through; a non-JSON body on an error status keeps the status text
  }
  if (!response.ok) {
    const detail =
      body !== null && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : `${response.status} ${response.statusText}`;
    throw new ApiHttpError(response.status, detail);
  }
  if (body === null || typeof body !== "object") {
    throw new ApiHttpError(response.status, "malformed JSON body");
  }
  return body;
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async fetchDistribution(season: number, type: string): Promise<DistributionDoc> {
    const query = new URLSearchParams({ season: String(season), type });
    return (await getJson(`${this.baseUrl}/distribution?${query}`)) as DistributionDoc;
  }

  async fetchPayoffs(type: string): Promise<PayoffsDoc> {
    const query = new URLSearchParams({ type });
    return (await getJson(`${this.baseUrl}/payoffs?${query}`)) as PayoffsDoc;
  }

  async fetchRecommendation(q: RecommendationQuery): Promise<RecommendationDoc> {
    const query = new URLSearchParams({
      season: String(q.season),
      type: q.type,
      tau: String(q.tau),
      p_high: String(q.pHigh),
      p_low: String(q.pLow),
    });
    if (q.tilt !== null) query.set("tilt", q.tilt);
    if (q.eLong !== null) query.set("e_long", String(q.eLong));
    if (q.eShort !== null) query.set("e_short", String(q.eShort));
    return (await getJson(`${this.baseUrl}/recommendation?${query}`)) as RecommendationDoc;
  }
}
