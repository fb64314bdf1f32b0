import type { ApiClient } from "./api.js";
import { Debouncer } from "./debounce.js";

export interface TranslatorView {
  render(text: string): void;
  showBanner(message: string): void;
  clearBanner(): void;
}

export function randomSessionId(): string {
  const bytes = new Uint8Array(8);
  crypto.getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

/** As-you-type translation loop.
 *
 * Edits are debounced; each issued request carries a fresh, strictly
 * increasing generation. Superseded responses are dropped silently, and a
 * response only renders if no higher generation has rendered yet, so the
 * visible translation always belongs to the newest completed request. */
export class AsYouTypeController {
  readonly sessionId: string;
  enabled = true;
  model: string | null = null;

  private generation = 0;
  private renderedGeneration = 0;
  private readonly debouncer: Debouncer;

  constructor(
    private readonly api: ApiClient,
    private readonly view: TranslatorView,
    debounceMs = 300,
    sessionId: string = randomSessionId(),
  ) {
    this.debouncer = new Debouncer(debounceMs);
    this.sessionId = sessionId;
  }

  /** Called on every input edit; issues nothing while disabled. */
  onEdit(text: string): void {
    if (!this.enabled || this.model === null) return;
    this.debouncer.schedule(() => void this.issue(text));
  }

  /** Explicit translate action (the button path when as-you-type is off). */
  translateNow(text: string): Promise<void> {
    this.debouncer.cancel();
    return this.issue(text);
  }

  setEnabled(enabled: boolean): void {
    this.enabled = enabled;
    if (!enabled) this.debouncer.cancel();
  }

  private async issue(text: string): Promise<void> {
    if (this.model === null) return;
    const generation = ++this.generation;
    let outcome;
    try {
      outcome = await this.api.translate(this.model, text, this.sessionId, generation);
    } catch (err) {
      if (generation > this.renderedGeneration) {
        this.view.showBanner(`service unreachable: ${(err as Error).message}`);
      }
      return;
    }
    switch (outcome.kind) {
      case "ok":
        if (generation > this.renderedGeneration) {
          this.renderedGeneration = generation;
          this.view.clearBanner();
          this.view.render(outcome.text);
        }
        break;
      case "superseded":
        break; // a newer edit is already in flight; nothing to show
      case "error":
        if (generation > this.renderedGeneration) {
          this.view.showBanner(`${outcome.code}: ${outcome.message}`);
        }
        break;
    }
  }
}
