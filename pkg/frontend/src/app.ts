// Browser entry point: one socket per session, UI state updated from the
// ordered message stream. Left pane hosts the hex map; the sidebar hosts
// the turn panel, event feed, and the analytics screens.

import { DEMOGRAPHICS_STATS, layoutPolicyTrees, layoutTechTree, techEdges } from "./analytics.js";
import { drawChart } from "./charts.js";
import { Camera, canvasToTile, defaultCamera, drawMap, panCamera, zoomCamera } from "./mapview.js";
import { ABILITY_FORTIFY, ABILITY_FOUND_CITY, ABILITY_IMPROVE, PlanBuilder, buildLayout } from "./plan.js";
import { FoggedView, GameClient, ViewPayload, connectBrowser } from "./protocol.js";

const $ = (id: string) => document.getElementById(id)!;

class ViewerApp {
  client = new GameClient();
  session: string | null = null;
  mode: "human_play" | "replay" = "human_play";
  agentSlot = 0;
  view: ViewPayload | null = null;
  masks: number[][] = [];
  plan: PlanBuilder | null = null;
  rules: any = null;
  camera: Camera | null = null;
  selectedTile = -1;
  selectedUnitSlot = -1;
  selectedCitySlot = -1;
  replayTurn = 1;
  replayTurns = 1;
  canvas = $("map") as HTMLCanvasElement;
  busy = false;

  async connect(): Promise<void> {
    const url = `ws://${location.host}/ws`;
    await connectBrowser(url, this.client);
    await this.client.hello();
    this.rules = await this.client.rules();
    this.client.onEvent((env) => this.logEvent(env.payload));
  }

  async newGame(seed: number): Promise<void> {
    const created = await this.client.createHumanSession(seed, { policy: "greedy" });
    this.session = created.session;
    this.mode = "human_play";
    this.agentSlot = created.agent_slot;
    this.masks = created.masks;
    this.view = created.view;
    this.plan = new PlanBuilder(
      buildLayout(created.view.scalars.unit_slot_capacity,
                  created.view.scalars.city_slot_capacity,
                  created.view.vectors.cs_met.length,
                  created.action_sizes),
      created.masks);
    await this.client.subscribe(this.session!);
    this.camera = defaultCamera(this.view!, this.canvas.width, this.canvas.height);
    this.logEvent({ kind: "session", note: `playing agent ${this.agentSlot}, seed ${seed}` });
    this.refresh();
  }

  async openReplay(file: File): Promise<void> {
    const bytes = new Uint8Array(await file.arrayBuffer());
    let binary = "";
    bytes.forEach((b) => { binary += String.fromCharCode(b); });
    const created = await this.client.createReplaySession(btoa(binary));
    this.session = created.session;
    this.mode = "replay";
    this.replayTurn = 1;
    this.replayTurns = created.turns;
    this.view = created.view;
    ($("turnSlider") as HTMLInputElement).max = String(created.turns);
    this.camera = defaultCamera(this.view!, this.canvas.width, this.canvas.height);
    this.logEvent({ kind: "replay", note: `${created.turns} turns, `
      + `${created.final_victory.kind} victory` });
    this.refresh();
  }

  async seekReplay(turn: number): Promise<void> {
    if (!this.session || this.mode !== "replay") return;
    this.replayTurn = turn;
    this.view = await this.client.fetchState(this.session, turn);
    this.refresh();
  }

  async endTurn(): Promise<void> {
    if (!this.session || this.mode !== "human_play" || !this.plan || this.busy) return;
    this.busy = true;
    try {
      const result = await this.client.submitAction(this.session, this.plan.build());
      const diffs = this.plan.diffEcho(result.selected_actions);
      for (const diff of diffs) {
        this.logEvent({ kind: "sanitized", note:
          `${diff.name}: choice ${diff.sent} was replaced by pass` });
      }
      this.masks = result.masks;
      this.view = result.view;
      this.plan.updateMasks(result.masks);
      this.selectedUnitSlot = -1;
      this.selectedCitySlot = -1;
      if (result.done) {
        this.logEvent({ kind: "game_over", note:
          `${result.victory.kind} victory, winner ${result.victory.winner}` });
      }
      this.refresh();
    } finally {
      this.busy = false;
    }
  }

  logEvent(payload: any): void {
    const feed = $("events");
    const line = document.createElement("div");
    line.className = "event";
    line.textContent = JSON.stringify(payload.event ?? payload);
    feed.prepend(line);
    while (feed.childElementCount > 60) feed.lastElementChild!.remove();
  }

  refresh(): void {
    if (!this.view || !this.camera) return;
    drawMap(this.canvas.getContext("2d")!, this.view, this.camera,
            this.canvas.width, this.canvas.height, this.selectedTile);
    this.renderSidebar();
  }

  renderSidebar(): void {
    const view = this.view!;
    const info = $("status");
    if (view.mode === "fogged") {
      const s = (view as FoggedView).scalars;
      info.textContent = `Turn ${s.turn} | gold ${s.gold} (+${s.gold_rate}) | `
        + `science +${s.science_rate} | culture +${s.culture_rate} | `
        + `tourism +${s.tourism_rate}`
        + (s.congress_session_pending ? " | CONGRESS VOTE OPEN" : "");
    } else {
      info.textContent = `Replay turn ${this.replayTurn}/${this.replayTurns}`;
    }
    this.renderTurnPanel();
  }

  renderTurnPanel(): void {
    const panel = $("panel");
    panel.innerHTML = "";
    if (this.mode !== "human_play" || !this.plan || !this.view ||
        this.view.mode !== "fogged") {
      return;
    }
    const view = this.view as FoggedView;
    const addChoice = (label: string, options: Array<{ text: string; value: number;
                       enabled: boolean; current: boolean }>,
                       onPick: (value: number) => void) => {
      const box = document.createElement("div");
      box.className = "choice";
      const title = document.createElement("div");
      title.className = "choice-title";
      title.textContent = label;
      box.appendChild(title);
      for (const opt of options) {
        const btn = document.createElement("button");
        btn.textContent = opt.text;
        btn.disabled = !opt.enabled;
        if (opt.current) btn.classList.add("picked");
        btn.onclick = () => { onPick(opt.value); this.refresh(); };
        box.appendChild(btn);
      }
      panel.appendChild(box);
    };

    // Research choices; locked techs stay greyed out.
    const researchLegal = new Set(this.plan.legalIndices("research"));
    addChoice("Research", this.rules.techs.map((tech: any, i: number) => ({
      text: `${tech.id} (${tech.science_cost})`,
      value: i,
      enabled: researchLegal.has(1 + i),
      current: this.plan!.get("research") === 1 + i,
    })).filter((o: any) => o.enabled || o.current),
      (i) => this.plan!.setResearch(i));

    const policyLegal = new Set(this.plan.legalIndices("policy"));
    if (policyLegal.size > 1) {
      addChoice("Social policy", this.rules.policies.map((p: any, i: number) => ({
        text: `${p.tree}/${p.id}`,
        value: i,
        enabled: policyLegal.has(1 + i),
        current: this.plan!.get("policy") === 1 + i,
      })).filter((o: any) => o.enabled),
        (i) => this.plan!.setPolicy(i));
    }

    if (this.plan.congressVoteOpen()) {
      addChoice("World Congress vote",
        [0, 1, 2, 3, 4, 5].map((a) => ({
          text: `agent ${a}`, value: a,
          enabled: this.plan!.legal("congress_vote", 1 + a),
          current: this.plan!.get("congress_vote") === 1 + a,
        })),
        (a) => this.plan!.setCongressVote(a));
    }

    for (const unit of view.own_units) {
      if (unit.slot !== this.selectedUnitSlot) continue;
      const abilities = [
        { name: "found city", code: ABILITY_FOUND_CITY },
        { name: "improve", code: ABILITY_IMPROVE },
        { name: "fortify", code: ABILITY_FORTIFY },
      ];
      addChoice(`Unit ${unit.slot} (kind ${unit.kind}, ${unit.hp} hp)`,
        abilities.map((a) => ({
          text: a.name, value: a.code,
          enabled: this.plan!.legal(`unit_${unit.slot}`, 1 + 37 + a.code),
          current: this.plan!.get(`unit_${unit.slot}`) === 1 + 37 + a.code,
        })),
        (code) => this.plan!.setUnitAbility(unit.slot, code));
    }

    for (const city of view.own_cities) {
      if (city.slot !== this.selectedCitySlot) continue;
      const legal = new Set(this.plan.legalIndices(`city_prod_${city.slot}`));
      const items: Array<{ text: string; value: number; enabled: boolean;
        current: boolean }> = [];
      const names = [
        ...this.rules.units.map((u: any) => `unit: ${u.id}`),
        ...this.rules.buildings.map((b: any) => `building: ${b.id}`),
        ...this.rules.projects.map((p: any) => `project: ${p.id}`),
      ];
      names.forEach((text, j) => {
        if (legal.has(1 + j)) {
          items.push({ text, value: 1 + j, enabled: true,
                       current: this.plan!.get(`city_prod_${city.slot}`) === 1 + j });
        }
      });
      addChoice(`City at tile ${city.tile} (pop ${city.population})`, items,
        (v) => this.plan!.setProduction(city.slot, v));
    }

    const end = document.createElement("button");
    end.id = "endTurn";
    end.className = "end-turn";
    end.textContent = "End turn";
    end.onclick = () => void this.endTurn();
    panel.appendChild(end);
  }

  async showDemographics(stat: string): Promise<void> {
    if (!this.session) return;
    const series = await this.client.demographics(this.session, stat);
    const canvas = $("chart") as HTMLCanvasElement;
    drawChart(canvas.getContext("2d")!, series, canvas.width, canvas.height, stat);
    $("analytics").classList.remove("hidden");
  }

  showTechTree(): void {
    if (!this.view) return;
    const unlocked = this.view.mode === "fogged"
      ? (this.view as FoggedView).vectors.tech_unlocked
      : this.rules.techs.map(() => 0);
    const available = this.view.mode === "fogged"
      ? (this.view as FoggedView).vectors.tech_available
      : this.rules.techs.map(() => 0);
    const nodes = layoutTechTree(this.rules, unlocked, available);
    const edges = techEdges(nodes);
    const canvas = $("chart") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d")!;
    ctx.fillStyle = "#14161c";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const colW = canvas.width / (this.rules.eras.length + 0.5);
    const rowH = 26;
    const pos = nodes.map((n) => ({ x: 20 + n.column * colW, y: 28 + n.row * rowH }));
    ctx.strokeStyle = "#4a5160";
    edges.forEach(([from, to]) => {
      ctx.beginPath();
      ctx.moveTo(pos[from].x + colW * 0.62, pos[from].y + 8);
      ctx.lineTo(pos[to].x, pos[to].y + 8);
      ctx.stroke();
    });
    nodes.forEach((n, i) => {
      ctx.fillStyle = n.state === "unlocked" ? "#2e7d32"
        : n.state === "available" ? "#9b7c1f" : "#30343f";
      ctx.fillRect(pos[i].x, pos[i].y, colW * 0.62, 18);
      ctx.fillStyle = "#e6e9ef";
      ctx.font = "10px sans-serif";
      ctx.fillText(`${n.id} (${n.cost})`, pos[i].x + 3, pos[i].y + 12,
                   colW * 0.6);
    });
    $("analytics").classList.remove("hidden");
  }

  showPolicyScreen(): void {
    if (!this.view || this.view.mode !== "fogged") return;
    const view = this.view as FoggedView;
    const nodes = layoutPolicyTrees(this.rules, view.vectors.policy_adopted,
                                    view.vectors.policy_affordable);
    const canvas = $("chart") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d")!;
    ctx.fillStyle = "#14161c";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const trees = [...new Set(nodes.map((n) => n.tree))].sort();
    const colW = canvas.width / (trees.length + 0.3);
    nodes.forEach((n) => {
      const x = 16 + trees.indexOf(n.tree) * colW;
      const y = 40 + n.slot * 30;
      ctx.fillStyle = n.state === "adopted" ? "#2e7d32"
        : n.state === "available" ? "#9b7c1f" : "#30343f";
      ctx.fillRect(x, y, colW * 0.8, 22);
      ctx.fillStyle = "#e6e9ef";
      ctx.font = "11px sans-serif";
      ctx.fillText(n.id, x + 4, y + 15, colW * 0.75);
    });
    ctx.fillStyle = "#aab0bd";
    trees.forEach((tree, i) => ctx.fillText(tree, 16 + i * colW, 24));
    $("analytics").classList.remove("hidden");
  }

  onClickTile(tile: number): void {
    this.selectedTile = tile;
    this.selectedUnitSlot = -1;
    this.selectedCitySlot = -1;
    if (this.view?.mode === "fogged") {
      const view = this.view as FoggedView;
      for (const u of view.own_units) {
        if (u.tile === tile) this.selectedUnitSlot = u.slot;
      }
      for (const c of view.own_cities) {
        if (c.tile === tile) this.selectedCitySlot = c.slot;
      }
      // Second click with a unit selected: order a move (disc slot lookup
      // happens server-side through the masks; here we map tile -> slot).
      if (this.selectedUnitSlot < 0 && this.pendingMoveSlot >= 0) {
        const disc = this.discSlotFor(this.pendingMoveSlot, tile);
        if (disc >= 0) this.plan?.setUnitMove(this.pendingMoveSlot, disc);
        this.pendingMoveSlot = -1;
      } else if (this.selectedUnitSlot >= 0) {
        this.pendingMoveSlot = this.selectedUnitSlot;
      }
    }
    this.refresh();
  }

  pendingMoveSlot = -1;

  /** Canonical radius-3 disc slot of `target` around the unit, or -1. */
  discSlotFor(unitSlot: number, target: number): number {
    const view = this.view as FoggedView;
    const unit = view.own_units.find((u: any) => u.slot === unitSlot);
    if (!unit || !this.view) return -1;
    const width = this.view.width;
    const toAxial = (tile: number) => {
      const col = tile % width;
      const row = Math.floor(tile / width);
      return { q: col - ((row - (row & 1)) >> 1), r: row };
    };
    const a = toAxial(unit.tile);
    const b = toAxial(target);
    const offsets: Array<[number, number]> = [];
    for (let dq = -3; dq <= 3; dq++) {
      for (let dr = -3; dr <= 3; dr++) {
        const d = Math.max(Math.abs(dq), Math.abs(dr), Math.abs(dq + dr));
        if (d <= 3) offsets.push([dq, dr]);
      }
    }
    offsets.sort((u, v) => {
      const du = Math.max(Math.abs(u[0]), Math.abs(u[1]), Math.abs(u[0] + u[1]));
      const dv = Math.max(Math.abs(v[0]), Math.abs(v[1]), Math.abs(v[0] + v[1]));
      return du - dv || u[0] - v[0] || u[1] - v[1];
    });
    return offsets.findIndex(([dq, dr]) => a.q + dq === b.q && a.r + dr === b.r);
  }
}

function wireUi(app: ViewerApp): void {
  const canvas = app.canvas;
  let dragging = false;
  let moved = false;
  let last = { x: 0, y: 0 };
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    moved = false;
    last = { x: e.offsetX, y: e.offsetY };
  });
  canvas.addEventListener("mousemove", (e) => {
    if (!dragging || !app.camera) return;
    const dx = e.offsetX - last.x;
    const dy = e.offsetY - last.y;
    if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
    panCamera(app.camera, dx, dy);
    last = { x: e.offsetX, y: e.offsetY };
    app.refresh();
  });
  canvas.addEventListener("mouseup", (e) => {
    dragging = false;
    if (!moved && app.view && app.camera) {
      const tile = canvasToTile(app.camera, app.view, e.offsetX, e.offsetY,
                                canvas.width, canvas.height);
      if (tile >= 0) app.onClickTile(tile);
    }
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    if (!app.camera) return;
    zoomCamera(app.camera, e.deltaY < 0 ? 1.15 : 1 / 1.15);
    app.refresh();
  });
  $("newGame").onclick = () => {
    const seed = parseInt(($("seed") as HTMLInputElement).value || "0", 10);
    void app.newGame(seed);
  };
  ($("replayFile") as HTMLInputElement).onchange = (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (file) void app.openReplay(file);
  };
  ($("turnSlider") as HTMLInputElement).oninput = (e) => {
    void app.seekReplay(parseInt((e.target as HTMLInputElement).value, 10));
  };
  const statPicker = $("statPicker") as HTMLSelectElement;
  for (const stat of DEMOGRAPHICS_STATS) {
    const opt = document.createElement("option");
    opt.value = stat;
    opt.textContent = stat;
    statPicker.appendChild(opt);
  }
  $("showDemo").onclick = () => void app.showDemographics(statPicker.value);
  $("showTech").onclick = () => app.showTechTree();
  $("showPolicy").onclick = () => app.showPolicyScreen();
  $("closeAnalytics").onclick = () => $("analytics").classList.add("hidden");
}

async function start(): Promise<void> {
  const app = new ViewerApp();
  wireUi(app);
  await app.connect();
  $("status").textContent = "connected; start a game or open a replay";
}

void start();
