/** DOM wiring: d3 scatter with zoom/brush, structure glyphs, panels, and
 * playback controls. All state lives in the SessionClient's store; this file
 * only draws it and forwards gestures.
 */
import * as d3 from "d3";
import { SessionClient, browserTransport } from "./client";
import { structureGlyphs } from "./glyphs";
import { detailList, orderSuggestions, panelState } from "./panels";
import { brushToRanges, plotPoint } from "./scales";
import { applyZoom, initialViewState, select, ViewState } from "./viewstate";
import type { Gesture, GroupState, StudentState } from "./types";

const PLOT = { width: 760, height: 520 };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export class DashboardApp {
  view: ViewState = initialViewState();
  private svg!: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private plotLayer!: d3.Selection<SVGGElement, unknown, null, undefined>;

  constructor(private client: SessionClient) {}

  mount(root: HTMLElement): void {
    this.svg = d3
      .select(root)
      .append("svg")
      .attr("width", PLOT.width)
      .attr("height", PLOT.height)
      .attr("class", "scatter");
    this.plotLayer = this.svg.append("g");
    const zoom = d3
      .zoom<SVGSVGElement, unknown>()
      .scaleExtent([0.5, 8])
      .on("zoom", (event) => {
        const level = this.view.level;
        this.view = applyZoom(this.view, event.transform.k);
        if (this.view.level !== level) {
          void this.client.setView(this.view.level);
        }
        this.render();
      });
    this.svg.call(zoom);
    const brush = d3
      .brush<unknown>()
      .extent([
        [0, 0],
        [PLOT.width, PLOT.height],
      ])
      .keyModifiers(false)
      .filter((event: any) => event.shiftKey)
      .on("end", (event) => {
        if (!event.selection) return;
        const [[x0, y0], [x1, y1]] = event.selection as [[number, number], [number, number]];
        const ranges = brushToRanges([x0, x1], [y0, y1], this.view.level, PLOT);
        this.view = select(this.view, { kind: "region", ...ranges });
        const gesture: Gesture = { kind: "AreaSelect", ...ranges };
        void this.client.emitInteraction(this.view.level, gesture);
      });
    this.svg.append("g").attr("class", "brush").call(brush);
    setInterval(() => this.render(), 250);
  }

  private pointClick(entityId: string): void {
    this.view = select(this.view, { kind: "point", entity_id: entityId });
    void this.client.emitInteraction(this.view.level, {
      kind: "PointClick",
      entity_id: entityId,
    });
    this.render();
  }

  render(): void {
    const store = this.client.store;
    el("clock").textContent = `t=${store.time_s.toFixed(0)}s (${store.clock.mode}, ${store.clock.speed}x)`;
    el("level").textContent = this.view.level;
    const flashes = new Set(store.activeFlashes().map((f) => `${f.kind}:${f.id}`));

    if (this.view.level === "StructureView") {
      const glyphs = structureGlyphs(store.groups, store.students);
      const sel = this.plotLayer
        .selectAll<SVGGElement, any>("g.glyph")
        .data(glyphs, (g: any) => g.group_id);
      sel.exit().remove();
      const enter = sel.enter().append("g").attr("class", "glyph");
      enter.append("circle").attr("r", 16).attr("class", "halo");
      const merged = enter.merge(sel);
      merged.attr("transform", (g) => {
        const p = plotPoint(store.groups[g.group_id], "StructureView", store.topics, PLOT);
        return `translate(${p.x},${p.y})`;
      });
      merged
        .classed("flash", (g) => flashes.has(`glyph:${g.group_id}`))
        .each(function (g) {
          const node = d3.select(this);
          node.selectAll("circle.member").remove();
          node.selectAll("line.edge").remove();
          g.nodes.forEach((member: any, i: number) => {
            const angle = (2 * Math.PI * i) / Math.max(1, g.nodes.length);
            node
              .append("circle")
              .attr("class", "member")
              .attr("cx", 12 * Math.cos(angle))
              .attr("cy", 12 * Math.sin(angle))
              .attr("r", 4)
              .attr("fill", member.color === "green" ? "#2e7d32" : "#e91e63");
          });
          g.edges.forEach((edge: any) => {
            const fromIdx = g.nodes.findIndex((n: any) => n.student_id === edge.from);
            const toIdx = g.nodes.findIndex((n: any) => n.student_id === edge.to);
            const a1 = (2 * Math.PI * fromIdx) / Math.max(1, g.nodes.length);
            const a2 = (2 * Math.PI * toIdx) / Math.max(1, g.nodes.length);
            node
              .append("line")
              .attr("class", "edge")
              .attr("x1", 12 * Math.cos(a1))
              .attr("y1", 12 * Math.sin(a1))
              .attr("x2", 12 * Math.cos(a2))
              .attr("y2", 12 * Math.sin(a2))
              .attr("stroke", "#607d8b")
              .attr("stroke-width", edge.width);
          });
        });
      merged.on("click", (_e, g) => this.pointClick(g.group_id));
    } else {
      const entities: Array<GroupState | StudentState> =
        this.view.level === "IndividualView"
          ? Object.values(store.students)
          : Object.values(store.groups);
      const key = (d: any) => d.student_id ?? d.group_id;
      const sel = this.plotLayer
        .selectAll<SVGCircleElement, any>("circle.dot")
        .data(entities, key);
      sel.exit().remove();
      const merged = sel
        .enter()
        .append("circle")
        .attr("class", "dot")
        .attr("r", 5)
        .merge(sel);
      this.plotLayer.selectAll("g.glyph").remove();
      merged
        .attr("cx", (d) => plotPoint(d, this.view.level, store.topics, PLOT).x)
        .attr("cy", (d) => plotPoint(d, this.view.level, store.topics, PLOT).y)
        .classed("flash", (d) => flashes.has(`point:${key(d)}`) || flashes.has(`glyph:${key(d)}`))
        .on("click", (_e, d) => this.pointClick(key(d)));
    }

    this.renderPanels(flashes);
  }

  private renderPanels(flashes: Set<string>): void {
    const store = this.client.store;
    const panels = panelState(store.notifications);
    const suggested = el("suggested");
    suggested.innerHTML = "";
    for (const draft of orderSuggestions(Object.values(store.drafts))) {
      const n = store.notifications[draft.draft_id];
      if (!n || n.status !== "Suggested") continue;
      const card = document.createElement("div");
      card.className = "card suggested";
      card.innerHTML = `
        <div class="reason">${draft.reason}</div>
        <div class="meta">${draft.provenance} · ${n.type}</div>
        <label>threshold <input type="number" value="${n.threshold ?? 0}" /></label>
        <button class="confirm">✓ activate</button>`;
      const input = card.querySelector("input") as HTMLInputElement;
      (card.querySelector("button.confirm") as HTMLButtonElement).onclick = async () => {
        // activation is always the instructor's explicit confirmation
        if (n.type === "Alert") {
          await this.client.editAlert(n.id, { threshold: Number(input.value) });
        }
        await this.client.activate(n.id);
      };
      suggested.appendChild(card);
    }
    const active = el("active");
    active.innerHTML = "";
    for (const n of panels.active) {
      const card = document.createElement("div");
      card.className = "card active" + (flashes.has(`alert:${n.id}`) ? " flash" : "");
      const matches = (n.match_list ?? []).join(", ");
      card.innerHTML = `
        <div class="reason">${n.reason}</div>
        <div class="meta">${n.type} · matches: ${n.match_count ?? 0}</div>
        <div class="matches">${matches}</div>`;
      active.appendChild(card);
    }
    const detail = el("detail");
    detail.innerHTML = "";
    for (const row of detailList(this.view.level, store.groups, store.students, store.topics)) {
      const div = document.createElement("div");
      div.className = "detail-row";
      div.textContent = `${row.value}: ${row.count}`;
      div.onclick = () =>
        void this.client.emitInteraction(this.view.level, {
          kind: "DetailRowExpand",
          attribute_value: row.value,
        });
      detail.appendChild(div);
    }
  }
}

async function main(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const sessionId = params.get("session") ?? "";
  const base = params.get("api") ?? `http://${location.hostname}:8000`;
  const client = new SessionClient(browserTransport(base), sessionId);
  const app = new DashboardApp(client);
  app.mount(el("plot"));
  await client.connect();
  el("playPause").onclick = () => void client.playback("Play");
  el("pause").onclick = () => void client.playback("Pause");
  el("speed").onchange = function (this: HTMLSelectElement | any) {
    void client.playback("SetSpeed", { multiplier: Number(this.value ?? 1) });
  };
  el("seek").onchange = function (this: HTMLInputElement | any) {
    void client.playback("Seek", { time_s: Number(this.value ?? 0) });
  };
  app.render();
}

if (typeof document !== "undefined" && document.getElementById("plot")) {
  window.addEventListener("load", () => void main());
}
