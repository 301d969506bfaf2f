import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ServerMessage, parseMessage } from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));

/** Recorded server stream: the exact lines a live run broadcast. */
export function fixtureLines(): string[] {
  const text = readFileSync(join(here, "fixtures", "telemetry.jsonl"), "utf8");
  return text.split("\n").filter((ln) => ln.length > 0);
}

export function fixtureMessages(): ServerMessage[] {
  return fixtureLines().map((ln) => {
    const msg = parseMessage(ln);
    if (msg === null) throw new Error(`unparseable fixture line: ${ln}`);
    return msg;
  });
}
