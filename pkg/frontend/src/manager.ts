import type { ApiClient } from "./api.js";
import type { Manifest } from "./types.js";

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** The download endpoint installs synchronously; progress display works by
 * polling the installed-models list until the id appears. */
export async function pollUntilInstalled(
  api: ApiClient,
  id: string,
  opts: { intervalMs?: number; maxAttempts?: number; wait?: (ms: number) => Promise<void> } = {},
): Promise<Manifest> {
  const intervalMs = opts.intervalMs ?? 500;
  const maxAttempts = opts.maxAttempts ?? 240;
  const wait = opts.wait ?? sleep;
  for (let attempt = 0; attempt < maxAttempts; attempt++) {
    const installed = (await api.models()).find((m) => m.id === id);
    if (installed) return installed;
    await wait(intervalMs);
  }
  throw new Error(`model ${id} did not appear after ${maxAttempts} polls`);
}

export function formatSize(bytes: number): string {
  if (bytes >= 1 << 20) return `${(bytes / (1 << 20)).toFixed(1)} MB`;
  if (bytes >= 1 << 10) return `${(bytes / (1 << 10)).toFixed(0)} kB`;
  return `${bytes} B`;
}

export function describeModel(m: Manifest): string {
  return `${m.name} (${m.src_lang} → ${m.trg_lang}, v${m.version})`;
}
