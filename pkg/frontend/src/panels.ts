/** Notification panel and detail-list derivations.
 *
 * Suggested and active notifications render as two columns; the detail list
 * aggregates conversation topics in Group/Structure view and code errors in
 * Individual view. All of it is derived from the store, never mutated here.
 */
import type {
  GroupState,
  NotificationJson,
  StudentState,
  SuggestionDraftJson,
  TopicsJson,
  ViewLevel,
} from "./types";

export interface PanelState {
  suggested: NotificationJson[];
  active: NotificationJson[];
}

export function panelState(notifications: Record<string, NotificationJson>): PanelState {
  const all = Object.values(notifications).sort((a, b) => a.id.localeCompare(b.id));
  return {
    suggested: all.filter((n) => n.status === "Suggested"),
    active: all.filter((n) => n.status === "Active"),
  };
}

export interface DetailRow {
  value: string;
  count: number;
}

/** Topic aggregation (Group/Structure view) or code-error aggregation
 * (Individual view), descending by count then label. */
export function detailList(
  level: ViewLevel,
  groups: Record<string, GroupState>,
  students: Record<string, StudentState>,
  topics: TopicsJson,
): DetailRow[] {
  const counts = new Map<string, number>();
  if (level === "IndividualView") {
    for (const s of Object.values(students)) {
      if (s.last_code_issue) {
        counts.set(s.last_code_issue, (counts.get(s.last_code_issue) ?? 0) + 1);
      }
    }
  } else {
    for (const g of Object.values(groups)) {
      const label = topics.topics[g.topic_id] ?? g.topic_id;
      counts.set(label, (counts.get(label) ?? 0) + 1);
    }
  }
  return [...counts.entries()]
    .map(([value, count]) => ({ value, count }))
    .sort((a, b) => b.count - a.count || a.value.localeCompare(b.value));
}

/** Suggested-draft provenance decides the panel slot ordering: interaction
 * drafts surface above cadenced historic ones of the same age. */
export function orderSuggestions(drafts: SuggestionDraftJson[]): SuggestionDraftJson[] {
  const rank = (d: SuggestionDraftJson) => (d.provenance === "InteractionBased" ? 0 : 1);
  return [...drafts].sort(
    (a, b) => b.created_at_s - a.created_at_s || rank(a) - rank(b) || a.draft_id.localeCompare(b.draft_id),
  );
}

/** Class performance: how many students passed k of the unit tests. */
export function passDistribution(
  students: Record<string, StudentState>,
  testsTotal: number,
): number[] {
  const bars = new Array(testsTotal + 1).fill(0);
  for (const s of Object.values(students)) {
    const passed = Math.round((s.pass_rate / 100) * testsTotal);
    bars[Math.min(testsTotal, Math.max(0, passed))] += 1;
  }
  return bars;
}
