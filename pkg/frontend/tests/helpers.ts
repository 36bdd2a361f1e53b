// Test harness: spawns the Python session service and adapts a node `ws`
// socket to the client's WireSocket interface.

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import WebSocket from "ws";
import { GameClient, WireSocket } from "../src/protocol.js";

export interface ServiceHandle {
  proc: ChildProcess;
  host: string;
  port: number;
  stop(): void;
}

export function startService(): Promise<ServiceHandle> {
  return new Promise((resolve, reject) => {
    const proc = spawn("python3", ["-m", "terranova.cli", "serve",
                                   "--listen", "127.0.0.1:0"],
                       { stdio: ["ignore", "pipe", "pipe"] });
    let buffer = "";
    const onData = (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/TERRA_SERVICE_LISTENING (\S+):(\d+)/);
      if (match) {
        proc.stdout!.off("data", onData);
        resolve({
          proc,
          host: match[1],
          port: parseInt(match[2], 10),
          stop: () => proc.kill(),
        });
      }
    };
    proc.stdout!.on("data", onData);
    proc.on("error", reject);
    proc.on("exit", (code) => reject(new Error(`service exited early: ${code}`)));
    setTimeout(() => reject(new Error("service did not start in time")), 20000);
  });
}

export function connectClient(handle: ServiceHandle): Promise<GameClient> {
  return new Promise((resolve, reject) => {
    const client = new GameClient();
    const ws = new WebSocket(`ws://${handle.host}:${handle.port}/ws`);
    const socket: WireSocket = {
      send: (text) => ws.send(text),
      close: () => ws.close(),
    };
    ws.on("open", () => {
      client.attach(socket);
      resolve(client);
    });
    ws.on("message", (data) => client.handleMessage(data.toString()));
    ws.on("close", () => client.handleClose());
    ws.on("error", (err) => reject(err));
  });
}

/** Run a terranova CLI command synchronously; throws on failure. */
export function runCli(args: string[]): string {
  const result = spawnSync("python3", ["-m", "terranova.cli", ...args],
                           { encoding: "utf-8", maxBuffer: 64 * 1024 * 1024 });
  if (result.status !== 0) {
    throw new Error(`terranova ${args.join(" ")} failed: ${result.stderr}`);
  }
  return result.stdout;
}
