// Wire protocol client: JSON envelopes over a WebSocket (one envelope per
// text frame). The client renders only what arrives over this protocol;
// there is no game logic on this side of the wire.

export interface Envelope {
  type: string;
  session: string | null;
  seq: number;
  payload: any;
}

export interface WireSocket {
  send(text: string): void;
  close(): void;
}

export interface FoggedView {
  mode: "fogged";
  width: number;
  height: number;
  layers: Record<string, number[]>;
  own_cities: any[];
  own_units: any[];
  scalars: Record<string, number>;
  vectors: Record<string, number[]>;
  vector_valid: Record<string, number[]>;
}

export interface OmniscientView {
  mode: "omniscient";
  width: number;
  height: number;
  turn: number;
  layers: Record<string, number[]>;
  cities: any[];
  units: any[];
  empires: any[];
  congress: any;
  victory: any;
  demographics_row: Record<string, number[]>;
}

export type ViewPayload = FoggedView | OmniscientView;

export const UNKNOWN = -1;
export const VIS_UNEXPLORED = 0;
export const VIS_EXPLORED = 1;
export const VIS_VISIBLE = 2;

type Resolver = { resolve: (env: Envelope) => void; reject: (err: Error) => void };

export class GameClient {
  private socket: WireSocket | null = null;
  private seq = 0;
  private pending = new Map<number, Resolver>();
  private eventHandlers: Array<(env: Envelope) => void> = [];
  /** Every envelope received, in order; the fidelity audits read this. */
  readonly captureLog: Envelope[] = [];

  attach(socket: WireSocket): void {
    this.socket = socket;
  }

  /** Transport calls this with each raw text frame. */
  handleMessage(text: string): void {
    const env = JSON.parse(text) as Envelope;
    this.captureLog.push(env);
    if (env.type === "event") {
      for (const handler of this.eventHandlers) handler(env);
      return;
    }
    const waiter = this.pending.get(env.seq);
    if (waiter) {
      this.pending.delete(env.seq);
      if (env.type === "error") {
        waiter.reject(new Error(`${env.payload.code}: ${env.payload.message}`));
      } else {
        waiter.resolve(env);
      }
    }
  }

  handleClose(): void {
    for (const [, waiter] of this.pending) {
      waiter.reject(new Error("connection closed"));
    }
    this.pending.clear();
  }

  onEvent(handler: (env: Envelope) => void): void {
    this.eventHandlers.push(handler);
  }

  request(type: string, payload: any = {}, session: string | null = null): Promise<Envelope> {
    if (!this.socket) throw new Error("client is not attached to a socket");
    const seq = ++this.seq;
    const env: Envelope = { type, session, seq, payload };
    const promise = new Promise<Envelope>((resolve, reject) => {
      this.pending.set(seq, { resolve, reject });
    });
    this.socket.send(JSON.stringify(env));
    return promise;
  }

  async hello(): Promise<any> {
    return (await this.request("hello", { protocol: 1 })).payload;
  }

  async rules(): Promise<any> {
    return (await this.request("rules")).payload.rules;
  }

  async createHumanSession(seed: number, opts: any = {}): Promise<any> {
    return (await this.request("create_session", {
      mode: "human_play", seed, ...opts,
    })).payload;
  }

  async createReplaySession(replayB64: string): Promise<any> {
    return (await this.request("create_session", {
      mode: "replay", replay_b64: replayB64,
    })).payload;
  }

  async submitAction(session: string, action: number[] | null): Promise<any> {
    return (await this.request("submit_action", { action }, session)).payload;
  }

  async fetchState(session: string, turn?: number): Promise<ViewPayload> {
    const payload = turn === undefined ? {} : { turn };
    return (await this.request("fetch_state", payload, session)).payload.view;
  }

  async demographics(session: string, stat: string): Promise<number[][]> {
    return (await this.request("demographics", { stat }, session)).payload.series;
  }

  async subscribe(session: string): Promise<void> {
    await this.request("subscribe", {}, session);
  }

  async closeSession(session: string): Promise<void> {
    await this.request("close_session", {}, session);
  }
}

/** Browser transport: native WebSocket speaking one envelope per frame. */
export function connectBrowser(url: string, client: GameClient): Promise<WireSocket> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    const socket: WireSocket = {
      send: (text) => ws.send(text),
      close: () => ws.close(),
    };
    ws.onopen = () => {
      client.attach(socket);
      resolve(socket);
    };
    ws.onmessage = (msg) => client.handleMessage(String(msg.data));
    ws.onclose = () => client.handleClose();
    ws.onerror = () => reject(new Error(`could not connect to ${url}`));
  });
}

/**
 * Audit one play-mode view payload for fog leaks: every dynamic layer value
 * on a tile below full visibility must be the UNKNOWN sentinel. Returns the
 * offending (layer, tile) pairs; an empty list means the payload is clean.
 */
export const DYNAMIC_LAYERS = [
  "improvement", "owner", "city_owner", "city_population",
  "unit_military_kind", "unit_military_owner",
  "unit_civilian_kind", "unit_civilian_owner",
];

export function auditViewFog(view: FoggedView): Array<{ layer: string; tile: number }> {
  const violations: Array<{ layer: string; tile: number }> = [];
  const vis = view.layers["visibility"];
  for (const layer of DYNAMIC_LAYERS) {
    const values = view.layers[layer];
    if (!values) continue;
    for (let t = 0; t < values.length; t++) {
      if (vis[t] < VIS_VISIBLE && values[t] !== UNKNOWN) {
        violations.push({ layer, tile: t });
      }
    }
  }
  return violations;
}
