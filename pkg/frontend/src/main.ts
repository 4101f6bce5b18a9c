// Browser entry point: wires the app to the page and the native WebSocket.

import { TrainerApp } from "./app.js";
import type { SocketLike } from "./client.js";

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}`;
}

window.addEventListener("load", () => {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  const params = new URLSearchParams(location.search);
  const app = new TrainerApp(root, {
    url: params.get("server") ?? wsUrl(),
    participant: params.get("participant") ?? undefined,
    socketFactory: (url) => new WebSocket(url) as unknown as SocketLike,
  });
  app.connect();
});
