/** DOM wiring for the decision explorer.
 *
 * Renders a view model built purely from endpoint documents and pushes
 * every input change back through the store, which re-queries the
 * server. No probability or dollar figure on this page is computed in
 * the browser.
 */

import { ApiClient } from "./api.js";
import {
  DEFAULT_PLOT,
  cdfPath,
  plotGeometry,
  pixelToX,
  xToPixel,
  xTicks,
  yTicks,
  yToPixel,
  type PlotGeometry,
} from "./cdf.js";
import {
  ExplorerStore,
  OUTLOOKS,
  ROLES,
  buildViewModel,
  type ExplorerInputs,
  type Outlook,
  type Role,
} from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const TAU_DEBOUNCE_MS = 120;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

export interface Mounted {
  store: ExplorerStore;
  root: HTMLElement;
}

export async function mountExplorer(
  root: HTMLElement,
  client: ApiClient,
  initial: Partial<ExplorerInputs> = {},
): Promise<Mounted> {
  const store = new ExplorerStore(client, initial);

  // -- controls ----------------------------------------------------------
  const seasonInput = el("input", {
    type: "number",
    step: "1",
    "data-testid": "season-input",
  }) as HTMLInputElement;
  const typeSelect = el("select", { "data-testid": "type-select" }) as HTMLSelectElement;
  for (const token of ["nonvalencia", "valencia"]) {
    typeSelect.append(el("option", { value: token }, token));
  }
  const tauInput = el("input", {
    type: "number",
    step: "0.1",
    "data-testid": "tau-input",
  }) as HTMLInputElement;
  const pHighInput = el("input", {
    type: "number",
    step: "0.01",
    min: "0",
    max: "1",
    "data-testid": "p-high-input",
  }) as HTMLInputElement;
  const pLowInput = el("input", {
    type: "number",
    step: "0.01",
    min: "0",
    max: "1",
    "data-testid": "p-low-input",
  }) as HTMLInputElement;
  const outlookSelect = el("select", {
    "data-testid": "outlook-select",
  }) as HTMLSelectElement;
  for (const outlook of OUTLOOKS) {
    outlookSelect.append(el("option", { value: outlook }, outlook.replace("_", " ")));
  }
  const eLongInput = el("input", {
    type: "number",
    step: "1",
    min: "0",
    placeholder: "stored",
    "data-testid": "override-long",
  }) as HTMLInputElement;
  const eShortInput = el("input", {
    type: "number",
    step: "1",
    min: "0",
    placeholder: "stored",
    "data-testid": "override-short",
  }) as HTMLInputElement;

  const roleWrap = el("div", { class: "roles", "data-testid": "role-switch" });
  const roleInputs = new Map<Role, HTMLInputElement>();
  for (const role of ROLES) {
    const label = el("label", {}, "");
    const radio = el("input", {
      type: "radio",
      name: "role",
      value: role,
      "data-testid": `role-${role.toLowerCase()}`,
    }) as HTMLInputElement;
    label.append(radio, document.createTextNode(` ${role}`));
    roleWrap.append(label);
    roleInputs.set(role, radio);
  }

  const retryButton = el(
    "button",
    { type: "button", "data-testid": "retry-btn" },
    "Retry",
  ) as HTMLButtonElement;

  const fieldset = el("fieldset", { "data-testid": "controls" }) as HTMLFieldSetElement;
  const grid = el("div", { class: "control-grid" });
  const labelled = (caption: string, input: HTMLElement): HTMLElement => {
    const wrap = el("label", { class: "field" });
    wrap.append(el("span", {}, caption), input);
    return wrap;
  };
  grid.append(
    labelled("Season", seasonInput),
    labelled("Orange type", typeSelect),
    labelled("Threshold τ (%)", tauInput),
    labelled("p high", pHighInput),
    labelled("p low", pLowInput),
    labelled("Seasonal outlook", outlookSelect),
    labelled("Long payoff override ($/contract)", eLongInput),
    labelled("Short payoff override ($/contract)", eShortInput),
  );
  fieldset.append(grid, roleWrap);

  // -- status line -------------------------------------------------------
  const staleBadge = el(
    "span",
    { class: "badge stale", "data-testid": "stale-badge", hidden: "" },
    "stale data",
  );
  const loadingBadge = el(
    "span",
    { class: "badge", "data-testid": "loading-badge", hidden: "" },
    "updating…",
  );
  const errorLine = el("span", { class: "error", "data-testid": "error-line" }, "");
  const statusBar = el("div", { class: "status" });
  statusBar.append(staleBadge, loadingBadge, errorLine, retryButton);

  // -- CDF plot ----------------------------------------------------------
  const svg = svgEl("svg", {
    viewBox: `0 0 ${DEFAULT_PLOT.width} ${DEFAULT_PLOT.height}`,
    class: "cdf-plot",
    "data-testid": "cdf-plot",
  }) as SVGSVGElement;
  const axisGroup = svgEl("g", { class: "axes" });
  const curvePath = svgEl("path", {
    class: "cdf-curve",
    fill: "none",
    "data-testid": "cdf-curve",
  });
  const markerGroup = svgEl("g", { class: "marker", "data-testid": "tau-marker" });
  const markerLine = svgEl("line", { class: "marker-line" });
  const markerHandle = svgEl("circle", { r: "7", class: "marker-handle" });
  const markerText = svgEl("text", {
    class: "marker-label",
    "data-testid": "marker-label",
  });
  markerGroup.append(markerLine, markerHandle, markerText);
  svg.append(axisGroup, curvePath, markerGroup);

  // -- scenario card and decision tree ------------------------------------
  const card = el("section", { class: "card", "data-testid": "scenario-card" });
  const seasonLabel = el("h2", { "data-testid": "season-label" }, "—");
  const scenarioBadge = el("span", { class: "badge scenario", "data-testid": "scenario" }, "—");
  const positionBadge = el("span", { class: "badge position", "data-testid": "position" }, "—");
  const overrideBadge = el(
    "span",
    { class: "badge override", "data-testid": "override-badge", hidden: "" },
    "payoff override",
  );
  const pLine = el("p", {}, "P(error > τ): ");
  const pValue = el("strong", { "data-testid": "p-exceed" }, "—");
  pLine.append(pValue);
  const pointLine = el("p", {}, "Point estimate: ");
  const pointValue = el("strong", { "data-testid": "point-estimate" }, "—");
  pointLine.append(pointValue);
  const emvLine = el("p", {}, "EMV per contract, long ");
  const emvLongValue = el("strong", { "data-testid": "emv-long" }, "—");
  const emvShortValue = el("strong", { "data-testid": "emv-short" }, "—");
  emvLine.append(emvLongValue, document.createTextNode(" vs short "), emvShortValue);
  const actionHeading = el("h3", { "data-testid": "action-heading" }, "");
  const actionText = el("p", { class: "action", "data-testid": "action-text" }, "—");
  const advisory = el(
    "p",
    { class: "advisory", "data-testid": "advisory", hidden: "" },
    "",
  );
  const rationale = el("p", { class: "rationale", "data-testid": "rationale" }, "");
  card.append(
    seasonLabel,
    el("div", { class: "badges" }),
    pLine,
    pointLine,
    emvLine,
    actionHeading,
    actionText,
    advisory,
    rationale,
  );
  (card.children[1] as HTMLElement).append(scenarioBadge, positionBadge, overrideBadge);

  const tree = el("section", { class: "tree", "data-testid": "decision-tree" });
  tree.append(el("h3", {}, "Decision tree"));
  const treeP = el("span", { "data-testid": "tree-p" }, "—");
  const treeUp = el("span", { "data-testid": "tree-up" }, "—");
  const treeDown = el("span", { "data-testid": "tree-down" }, "—");
  const treeEmvLong = el("span", { "data-testid": "tree-emv-long" }, "—");
  const treeEmvShort = el("span", { "data-testid": "tree-emv-short" }, "—");
  const longRow = el("div", { class: "branch", "data-testid": "branch-long" });
  longRow.append(
    el("span", {}, "Long: gain "),
    treeUp,
    el("span", {}, " with p = "),
    treeP,
    el("span", {}, " → EMV "),
    treeEmvLong,
  );
  const shortRow = el("div", { class: "branch", "data-testid": "branch-short" });
  shortRow.append(
    el("span", {}, "Short: gain "),
    treeDown,
    el("span", {}, " otherwise → EMV "),
    treeEmvShort,
  );
  tree.append(longRow, shortRow);

  root.append(statusBar, fieldset, svg, card, tree);

  // -- rendering ----------------------------------------------------------
  let geom: PlotGeometry | null = null;
  let plottedFor: unknown = null;

  const renderPlot = (): void => {
    const dist = store.state.distribution;
    if (dist === null) return;
    if (plottedFor !== dist) {
      geom = plotGeometry(dist.samples);
      curvePath.setAttribute("d", cdfPath(dist.samples, geom));
      while (axisGroup.firstChild) axisGroup.removeChild(axisGroup.firstChild);
      for (const p of yTicks()) {
        const y = yToPixel(p, geom);
        axisGroup.append(
          svgEl("line", {
            x1: String(geom.marginLeft),
            x2: String(geom.width - geom.marginRight),
            y1: String(y),
            y2: String(y),
            class: "grid",
          }),
        );
        const label = svgEl("text", {
          x: String(geom.marginLeft - 6),
          y: String(y + 4),
          "text-anchor": "end",
          class: "tick",
        });
        label.textContent = p.toFixed(2);
        axisGroup.append(label);
      }
      for (const v of xTicks(geom)) {
        const x = xToPixel(v, geom);
        const label = svgEl("text", {
          x: String(x),
          y: String(geom.height - geom.marginBottom + 16),
          "text-anchor": "middle",
          class: "tick",
        });
        label.textContent = String(v);
        axisGroup.append(label);
      }
      plottedFor = dist;
    }
    if (geom !== null) {
      const x = Math.min(
        Math.max(xToPixel(store.state.inputs.tau, geom), geom.marginLeft),
        geom.width - geom.marginRight,
      );
      markerLine.setAttribute("x1", String(x));
      markerLine.setAttribute("x2", String(x));
      markerLine.setAttribute("y1", String(geom.marginTop));
      markerLine.setAttribute("y2", String(geom.height - geom.marginBottom));
      markerHandle.setAttribute("cx", String(x));
      markerHandle.setAttribute("cy", String(geom.marginTop + 10));
      markerText.setAttribute("x", String(x + 10));
      markerText.setAttribute("y", String(geom.marginTop + 14));
    }
  };

  const syncInput = (input: HTMLInputElement, value: string): void => {
    if (document.activeElement !== input && input.value !== value) {
      input.value = value;
    }
  };

  const render = (): void => {
    const vm = buildViewModel(store.state);
    const { inputs } = store.state;

    syncInput(seasonInput, String(inputs.season));
    if (typeSelect.value !== inputs.orangeType) typeSelect.value = inputs.orangeType;
    syncInput(tauInput, String(inputs.tau));
    syncInput(pHighInput, String(inputs.pHigh));
    syncInput(pLowInput, String(inputs.pLow));
    if (outlookSelect.value !== inputs.outlook) outlookSelect.value = inputs.outlook;
    syncInput(eLongInput, inputs.eLong === null ? "" : String(inputs.eLong));
    syncInput(eShortInput, inputs.eShort === null ? "" : String(inputs.eShort));
    for (const [role, radio] of roleInputs) radio.checked = role === inputs.role;

    staleBadge.hidden = !vm.staleBadgeVisible;
    loadingBadge.hidden = !vm.loading;
    errorLine.textContent = vm.errorText;
    retryButton.hidden = !vm.staleBadgeVisible;
    fieldset.disabled = vm.controlsDisabled;

    seasonLabel.textContent = vm.seasonLabel;
    scenarioBadge.textContent = vm.scenarioToken;
    positionBadge.textContent = vm.positionToken;
    overrideBadge.hidden = !vm.overrideActive;
    pValue.textContent = vm.pExceedText;
    pointValue.textContent = vm.pointEstimateText;
    emvLongValue.textContent = vm.emvLongText;
    emvShortValue.textContent = vm.emvShortText;
    actionHeading.textContent =
      inputs.role === "Trader" ? "Recommended position" : `Guidance for a ${inputs.role}`;
    actionText.textContent = vm.actionText;
    advisory.hidden = !vm.advisoryVisible;
    advisory.textContent = vm.advisoryVisible
      ? "Outlook advisory: the seasonal outlook tilts the overestimation risk; see rationale."
      : "";
    rationale.textContent = vm.rationaleText;
    markerText.textContent = vm.markerLabel;

    treeP.textContent = vm.treeProbabilityText;
    treeUp.textContent = vm.treeUpText;
    treeDown.textContent = vm.treeDownText;
    treeEmvLong.textContent = vm.emvLongText;
    treeEmvShort.textContent = vm.emvShortText;

    renderPlot();
  };

  store.subscribe(render);

  // -- input events --------------------------------------------------------
  const numeric = (raw: string): number | null => {
    const value = Number(raw);
    return raw.trim() === "" || Number.isNaN(value) ? null : value;
  };

  seasonInput.addEventListener("change", () => {
    const season = numeric(seasonInput.value);
    if (season !== null) void store.update({ season: Math.trunc(season) });
  });
  typeSelect.addEventListener("change", () => {
    void store.update({ orangeType: typeSelect.value });
  });
  tauInput.addEventListener("change", () => {
    const tau = numeric(tauInput.value);
    if (tau !== null) void store.update({ tau });
  });
  pHighInput.addEventListener("change", () => {
    const pHigh = numeric(pHighInput.value);
    if (pHigh !== null) void store.update({ pHigh });
  });
  pLowInput.addEventListener("change", () => {
    const pLow = numeric(pLowInput.value);
    if (pLow !== null) void store.update({ pLow });
  });
  outlookSelect.addEventListener("change", () => {
    void store.update({ outlook: outlookSelect.value as Outlook });
  });
  eLongInput.addEventListener("change", () => {
    void store.update({ eLong: numeric(eLongInput.value) });
  });
  eShortInput.addEventListener("change", () => {
    void store.update({ eShort: numeric(eShortInput.value) });
  });
  for (const [role, radio] of roleInputs) {
    radio.addEventListener("change", () => {
      if (radio.checked) void store.update({ role });
    });
  }
  retryButton.addEventListener("click", () => {
    void store.refresh();
  });

  // -- marker drag ---------------------------------------------------------
  let dragTimer: ReturnType<typeof setTimeout> | null = null;
  let dragging = false;

  const clientToTau = (clientX: number): number | null => {
    if (geom === null) return null;
    const rect = svg.getBoundingClientRect();
    if (rect.width === 0) return null;
    const px = ((clientX - rect.left) / rect.width) * geom.width;
    return pixelToX(px, geom);
  };

  markerHandle.addEventListener("pointerdown", (event) => {
    dragging = true;
    (event.target as Element).setPointerCapture?.((event as PointerEvent).pointerId);
  });
  svg.addEventListener("pointermove", (event) => {
    if (!dragging) return;
    const tau = clientToTau((event as PointerEvent).clientX);
    if (tau === null) return;
    if (dragTimer !== null) clearTimeout(dragTimer);
    dragTimer = setTimeout(() => {
      void store.update({ tau: Number(tau.toFixed(2)) });
    }, TAU_DEBOUNCE_MS);
  });
  svg.addEventListener("pointerup", (event) => {
    if (!dragging) return;
    dragging = false;
    if (dragTimer !== null) clearTimeout(dragTimer);
    const tau = clientToTau((event as PointerEvent).clientX);
    if (tau !== null) void store.update({ tau: Number(tau.toFixed(2)) });
  });

  render();
  await store.refresh();
  return { store, root };
}

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "http://127.0.0.1:8000";
}

const autoRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (autoRoot !== null) {
  void mountExplorer(autoRoot, new ApiClient(apiBase()));
}
