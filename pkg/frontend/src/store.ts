/** Dashboard state: a pure fold of (snapshot, stream messages).
 *
 * The dashboard derives everything it draws from this store, so two clients
 * that saw the same snapshot+stream prefix render identically — that is what
 * makes reconnect-and-resnapshot safe.
 */
import type {
  FrameDeltaPayload,
  GroupState,
  NotificationJson,
  SnapshotJson,
  StreamMessage,
  StudentState,
  SuggestionDraftJson,
  TopicsJson,
  TriggerPayload,
} from "./types";

export interface Flash {
  kind: "glyph" | "alert" | "point";
  id: string;
  time_s: number;
}

const FLASH_FIELDS = new Set(["topic_id", "members_participated", "pass_rate", "group_pass_rate"]);

export class DashboardStore {
  session_id = "";
  time_s = 0;
  clock = { now_s: 0, speed: 1, mode: "Replay" };
  students: Record<string, StudentState> = {};
  groups: Record<string, GroupState> = {};
  topics: TopicsJson = { topics: {}, order: [], assignments: {} };
  notifications: Record<string, NotificationJson> = {};
  drafts: Record<string, SuggestionDraftJson> = {};
  triggers: TriggerPayload[] = [];
  flashes: Flash[] = [];

  static fromSnapshot(snapshot: SnapshotJson): DashboardStore {
    const store = new DashboardStore();
    store.loadSnapshot(snapshot);
    return store;
  }

  loadSnapshot(snapshot: SnapshotJson): void {
    this.session_id = snapshot.session_id;
    this.time_s = snapshot.time_s;
    this.clock = { ...snapshot.clock };
    this.students = { ...snapshot.students };
    this.groups = { ...snapshot.groups };
    this.topics = {
      topics: { ...snapshot.topics.topics },
      order: [...snapshot.topics.order],
      assignments: { ...snapshot.topics.assignments },
    };
    this.notifications = {};
    for (const n of snapshot.notifications) this.notifications[n.id] = n;
  }

  apply(message: StreamMessage): void {
    switch (message.kind) {
      case "FrameDelta":
        this.applyFrameDelta(message.payload as FrameDeltaPayload);
        break;
      case "TriggerEvent": {
        const trigger = message.payload as TriggerPayload;
        this.triggers.push(trigger);
        this.flashes.push({ kind: "alert", id: trigger.notification_id, time_s: trigger.time_s });
        const existing = this.notifications[trigger.notification_id];
        if (existing) {
          existing.trigger_count = (existing.trigger_count ?? 0) + 1;
        }
        break;
      }
      case "SuggestionDraft": {
        const draft = message.payload as SuggestionDraftJson;
        this.drafts[draft.draft_id] = draft;
        // a draft is a Suggested notification until the service says otherwise;
        // shape mirrors the service's notification JSON so digests compare equal
        if (!this.notifications[draft.draft_id]) {
          this.notifications[draft.draft_id] =
            draft.kind === "Alert"
              ? {
                  id: draft.draft_id,
                  type: "Alert",
                  status: "Suggested",
                  criteria: draft.criteria,
                  mode: draft.mode,
                  threshold: draft.threshold,
                  reason: draft.reason,
                  match_list: [],
                  match_count: 0,
                  trigger_count: 0,
                }
              : {
                  id: draft.draft_id,
                  type: "Tracker",
                  status: "Suggested",
                  attribute: draft.attribute,
                  chart: (draft.chart as "Bar" | "Line") ?? "Bar",
                  reason: draft.reason,
                  series: [],
                };
        }
        break;
      }
      case "NotificationStateChange": {
        const n = message.payload as NotificationJson;
        this.notifications[n.id] = n;
        break;
      }
      case "TopicRegistryUpdate":
        this.topics = {
          topics: { ...message.payload.topics },
          order: [...message.payload.order],
          assignments: { ...message.payload.assignments },
        };
        break;
      case "ClockUpdate":
        this.clock = { ...message.payload };
        if (message.payload.now_s < this.time_s) {
          // seek went backwards; caller must re-snapshot
          this.time_s = message.payload.now_s;
        }
        break;
    }
  }

  private applyFrameDelta(delta: FrameDeltaPayload): void {
    this.time_s = delta.time_s;
    this.clock.now_s = delta.time_s;
    for (const [sid, state] of Object.entries(delta.students)) {
      this.students[sid] = state;
    }
    for (const [gid, state] of Object.entries(delta.groups)) {
      this.groups[gid] = state;
    }
    for (const [entityId, field] of delta.change_set) {
      if (FLASH_FIELDS.has(field)) {
        const kind = delta.groups[entityId] ? "glyph" : "point";
        this.flashes.push({ kind, id: entityId, time_s: delta.time_s });
      }
    }
  }

  /** Flashes younger than ttl seconds of session time (renderer animates these). */
  activeFlashes(ttl = 2.0): Flash[] {
    return this.flashes.filter((f) => this.time_s - f.time_s <= ttl);
  }

  /** Stable digest of everything the dashboard draws; used to compare a
   * reconnected client against an always-connected one. Object keys are
   * sorted recursively so the source of a value (snapshot vs stream) cannot
   * affect the digest. Tracker series are excluded: charts derive from entity
   * state client-side, and series history only travels in snapshots. */
  displayDigest(): string {
    const canonical = (value: unknown): unknown => {
      if (Array.isArray(value)) return value.map(canonical);
      if (value && typeof value === "object") {
        return Object.fromEntries(
          Object.entries(value as Record<string, unknown>)
            .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
            .map(([k, v]) => [k, canonical(v)]),
        );
      }
      return value;
    };
    const notifications: Record<string, unknown> = {};
    for (const [id, n] of Object.entries(this.notifications)) {
      const { series: _series, ...rest } = n;
      notifications[id] = rest;
    }
    return JSON.stringify(
      canonical({
        time_s: this.time_s,
        students: this.students,
        groups: this.groups,
        topics: this.topics,
        notifications,
      }),
    );
  }
}
