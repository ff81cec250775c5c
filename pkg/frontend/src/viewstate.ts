/** Zoom-driven view level switching and selection state.
 *
 * The three levels are switchable by zooming: below the first threshold the
 * aggregated Group view shows, between thresholds the Structure view, above
 * the second the Individual view. Selections do not survive a level switch.
 */
import type { Gesture, ViewLevel } from "./types";

export const STRUCTURE_ZOOM = 1.5;
export const INDIVIDUAL_ZOOM = 3.0;

export type Selection =
  | { kind: "none" }
  | { kind: "point"; entity_id: string }
  | { kind: "region"; x_range: [number, number]; y_range: [number, number] };

export interface ViewState {
  level: ViewLevel;
  scale: number;
  selection: Selection;
}

export function initialViewState(): ViewState {
  return { level: "GroupView", scale: 1.0, selection: { kind: "none" } };
}

export function levelForScale(scale: number): ViewLevel {
  if (scale > INDIVIDUAL_ZOOM) return "IndividualView";
  if (scale >= STRUCTURE_ZOOM) return "StructureView";
  return "GroupView";
}

export function applyZoom(state: ViewState, scale: number): ViewState {
  const level = levelForScale(scale);
  return {
    level,
    scale,
    selection: level === state.level ? state.selection : { kind: "none" },
  };
}

export function select(state: ViewState, selection: Selection): ViewState {
  return { ...state, selection };
}

/** Gesture for the current selection, if it can seed a suggestion. */
export function selectionGesture(state: ViewState): Gesture | null {
  if (state.selection.kind === "point") {
    return { kind: "PointClick", entity_id: state.selection.entity_id };
  }
  if (state.selection.kind === "region") {
    return {
      kind: "AreaSelect",
      x_range: state.selection.x_range,
      y_range: state.selection.y_range,
    };
  }
  return null;
}
