/** Trailing-edge debouncer: the action runs once per quiet period. */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(readonly delayMs: number) {}

  schedule(action: () => void): void {
    this.cancel();
    this.timer = setTimeout(() => {
      this.timer = null;
      action();
    }, this.delayMs);
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get pending(): boolean {
    return this.timer !== null;
  }
}
