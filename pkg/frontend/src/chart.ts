import { EventOut, PosteriorOut } from "./types";

// SVG layout constants; purely presentational scaling
const BIN_W = 10;
const PLOT_H = 170;
const AXIS_H = 22;
const MARKER_H = 14;

export interface ChartState {
  posterior: PosteriorOut;
  ci90: number[];
  events: EventOut[];
  mode: number;
}

/**
 * Bar chart of the service-sent posterior with the 90% interval shaded and
 * one direction-coded marker per submitted comparison (an "older" judgment
 * points right, toward higher ages; "younger" points left).
 *
 * Bar heights are scaled for display only; the source mass values are kept
 * verbatim on each bar's data-mass attribute.
 */
export function renderPosteriorChart(container: HTMLElement, state: ChartState): void {
  const { posterior, ci90, events, mode } = state;
  const nBins = posterior.max_age - posterior.min_age + 1;
  const width = nBins * BIN_W;
  const height = PLOT_H + MARKER_H + AXIS_H;
  const peak = Math.max(...posterior.mass);

  const parts: string[] = [];
  parts.push(
    `<svg class="posterior-chart" viewBox="0 0 ${width} ${height}" ` +
      `data-mode="${mode}" data-ci-lo="${ci90[0]}" data-ci-hi="${ci90[1]}" ` +
      `preserveAspectRatio="none" role="img">`,
  );

  const x = (age: number) => (age - posterior.min_age) * BIN_W;

  // shaded 90% interval band
  parts.push(
    `<rect class="ci-band" x="${x(ci90[0])}" y="0" ` +
      `width="${(ci90[1] - ci90[0] + 1) * BIN_W}" height="${PLOT_H}"></rect>`,
  );

  posterior.mass.forEach((m, i) => {
    const h = peak > 0 ? (m / peak) * (PLOT_H - 6) : 0;
    const age = posterior.min_age + i;
    parts.push(
      `<rect class="bin${age === mode ? " bin-mode" : ""}" ` +
        `x="${x(age) + 1}" y="${PLOT_H - h}" width="${BIN_W - 2}" height="${h}" ` +
        `data-age="${age}" data-mass="${m}"></rect>`,
    );
  });

  events.forEach((ev) => {
    const cx = x(ev.ref_age) + BIN_W / 2;
    const older = ev.outcome === "older";
    const tip = older ? cx + 7 : cx - 7;
    const cy = PLOT_H + MARKER_H / 2;
    parts.push(
      `<g class="marker marker-${ev.outcome}" data-ref-age="${ev.ref_age}" ` +
        `data-outcome="${ev.outcome}">` +
        `<line x1="${cx}" y1="0" x2="${cx}" y2="${PLOT_H + MARKER_H}"></line>` +
        `<polygon points="${cx},${cy - 5} ${cx},${cy + 5} ${tip},${cy}"></polygon>` +
        `</g>`,
    );
  });

  // sparse age axis labels
  for (let age = posterior.min_age; age <= posterior.max_age; age += 10) {
    parts.push(
      `<text class="axis-label" x="${x(age) + BIN_W / 2}" y="${height - 6}">${age}</text>`,
    );
  }
  parts.push("</svg>");
  container.innerHTML = parts.join("");
}
