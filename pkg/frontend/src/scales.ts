/** Axis domains and point placement for the three view levels.
 *
 * Group and Individual views plot pass rate (x, 0..100%) against activity
 * level (y, 0..12). The Structure view plots topic index (registry order)
 * against active-member count (0..3). Out-of-domain values clamp to the axis
 * bounds so a point is always drawable.
 */
import type { GroupState, StudentState, TopicsJson, ViewLevel } from "./types";

export const PASS_RATE_DOMAIN: [number, number] = [0, 100];
export const ACTIVITY_DOMAIN: [number, number] = [0, 12];
export const PARTICIPATION_DOMAIN: [number, number] = [0, 3];

export interface PlotSize {
  width: number;
  height: number;
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

/** Map a domain value to pixels; y is screen-down so the domain max is at 0. */
function toPixels(
  x: number,
  y: number,
  xDomain: [number, number],
  yDomain: [number, number],
  size: PlotSize,
): { x: number; y: number } {
  const fx = (clamp(x, xDomain[0], xDomain[1]) - xDomain[0]) / (xDomain[1] - xDomain[0]);
  const fy = (clamp(y, yDomain[0], yDomain[1]) - yDomain[0]) / (yDomain[1] - yDomain[0]);
  return { x: fx * size.width, y: (1 - fy) * size.height };
}

export function plotGroupPoint(group: GroupState, size: PlotSize): { x: number; y: number } {
  return toPixels(group.group_pass_rate, group.team_activity, PASS_RATE_DOMAIN, ACTIVITY_DOMAIN, size);
}

export function plotStudentPoint(student: StudentState, size: PlotSize): { x: number; y: number } {
  return toPixels(student.pass_rate, student.activity_level, PASS_RATE_DOMAIN, ACTIVITY_DOMAIN, size);
}

/** Structure view: x = topic index in registry order, y = participation. */
export function plotStructurePoint(
  group: GroupState,
  topics: TopicsJson,
  size: PlotSize,
): { x: number; y: number } {
  const order = topicAxisOrder(topics);
  const idx = Math.max(0, order.indexOf(group.topic_id));
  const columns = Math.max(1, order.length - 1);
  return toPixels(idx, group.members_participated, [0, columns], PARTICIPATION_DOMAIN, size);
}

/** Topic axis: sentinel first, then registry order (stable across frames). */
export function topicAxisOrder(topics: TopicsJson): string[] {
  const seen = new Set<string>(topics.order);
  const axis = [...topics.order];
  for (const tid of Object.values(topics.assignments)) {
    if (!seen.has(tid)) {
      axis.unshift(tid); // "No Conversation" and other sentinels lead
      seen.add(tid);
    }
  }
  if (!axis.length) axis.push("No Conversation");
  return axis;
}

export function plotPoint(
  entity: GroupState | StudentState,
  level: ViewLevel,
  topics: TopicsJson,
  size: PlotSize,
): { x: number; y: number } {
  if (level === "IndividualView") return plotStudentPoint(entity as StudentState, size);
  if (level === "StructureView") return plotStructurePoint(entity as GroupState, topics, size);
  return plotGroupPoint(entity as GroupState, size);
}

/** Invert a pixel-space brush back to axis ranges for AreaSelect gestures. */
export function brushToRanges(
  pixelX: [number, number],
  pixelY: [number, number],
  level: ViewLevel,
  size: PlotSize,
): { x_range: [number, number]; y_range: [number, number] } {
  const xd = PASS_RATE_DOMAIN;
  const yd = level === "StructureView" ? PARTICIPATION_DOMAIN : ACTIVITY_DOMAIN;
  const fx = (px: number) => xd[0] + (clamp(px, 0, size.width) / size.width) * (xd[1] - xd[0]);
  const fy = (py: number) => yd[0] + (1 - clamp(py, 0, size.height) / size.height) * (yd[1] - yd[0]);
  const x0 = fx(Math.min(...pixelX));
  const x1 = fx(Math.max(...pixelX));
  // pixel y grows downward, so the min pixel is the max domain value
  const y1 = fy(Math.min(...pixelY));
  const y0 = fy(Math.max(...pixelY));
  return { x_range: [x0, x1], y_range: [y0, y1] };
}
