import { ApiClient } from "./api.js";
import { QueueView } from "./dom.js";
import { SessionClient } from "./session.js";

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

async function boot(): Promise<void> {
  const server = param("server") ?? window.location.origin;
  const api = new ApiClient(server);
  const client = new SessionClient(api);
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  new QueueView(root, client);

  const existing = param("session");
  try {
    if (existing) {
      await client.attach(existing);
    } else {
      const seedParam = param("seed");
      await client.start(seedParam === null ? undefined : Number(seedParam));
      const url = new URL(window.location.href);
      url.searchParams.set("session", client.sessionId);
      window.history.replaceState(null, "", url.toString());
    }
  } catch (error) {
    console.error(error);
  }
}

void boot();
