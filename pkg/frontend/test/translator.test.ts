import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { AsYouTypeController, type TranslatorView } from "../src/translator.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

interface ViewLog extends TranslatorView {
  rendered: string[];
  banners: string[];
}

function makeView(): ViewLog {
  const rendered: string[] = [];
  const banners: string[] = [];
  return {
    rendered,
    banners,
    render: (text) => rendered.push(text),
    showBanner: (message) => banners.push(message),
    clearBanner: () => {},
  };
}

function echoApi(calls: { url: string; body: any }[]): ApiClient {
  const fetchFn: FetchLike = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    calls.push({ url, body });
    return jsonResponse({ text: body?.text ?? "" });
  };
  return new ApiClient("http://127.0.0.1:8787", fetchFn);
}

describe("as-you-type debounce", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("issues exactly one request after a 300 ms quiet period", async () => {
    const calls: { url: string; body: any }[] = [];
    const controller = new AsYouTypeController(echoApi(calls), makeView(), 300, "tab");
    controller.model = "copy";

    controller.onEdit("hello");
    await vi.advanceTimersByTimeAsync(300);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.body.text).toBe("hello");
  });

  it("collapses 10 rapid edits within 300 ms into one request", async () => {
    const calls: { url: string; body: any }[] = [];
    const controller = new AsYouTypeController(echoApi(calls), makeView(), 300, "tab");
    controller.model = "copy";

    for (let i = 0; i < 10; i++) {
      controller.onEdit(`draft ${i}`);
      await vi.advanceTimersByTimeAsync(20);
    }
    expect(calls).toHaveLength(0); // still inside the burst
    await vi.advanceTimersByTimeAsync(300);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.body.text).toBe("draft 9");
  });

  it("issues zero requests while the toggle is off", async () => {
    const calls: { url: string; body: any }[] = [];
    const controller = new AsYouTypeController(echoApi(calls), makeView(), 300, "tab");
    controller.model = "copy";
    controller.setEnabled(false);

    for (let i = 0; i < 5; i++) {
      controller.onEdit(`typing ${i}`);
      await vi.advanceTimersByTimeAsync(100);
    }
    await vi.advanceTimersByTimeAsync(1000);
    expect(calls).toHaveLength(0);
  });

  it("cancels a pending request when the toggle turns off mid-burst", async () => {
    const calls: { url: string; body: any }[] = [];
    const controller = new AsYouTypeController(echoApi(calls), makeView(), 300, "tab");
    controller.model = "copy";

    controller.onEdit("almost");
    await vi.advanceTimersByTimeAsync(100);
    controller.setEnabled(false);
    await vi.advanceTimersByTimeAsync(1000);
    expect(calls).toHaveLength(0);
  });

  it("sends strictly increasing generations per session", async () => {
    const calls: { url: string; body: any }[] = [];
    const controller = new AsYouTypeController(echoApi(calls), makeView(), 300, "tab");
    controller.model = "copy";

    for (let i = 0; i < 3; i++) {
      controller.onEdit(`edit ${i}`);
      await vi.advanceTimersByTimeAsync(400);
    }
    const generations = calls.map((c) => c.body.generation);
    expect(generations).toEqual([1, 2, 3]);
    expect(new Set(calls.map((c) => c.body.session)).size).toBe(1);
  });
});

describe("stale-render guard", () => {
  it("never renders a lower generation over a higher one", async () => {
    const pending: Array<(r: Response) => void> = [];
    const bodies: any[] = [];
    const fetchFn: FetchLike = (url, init) => {
      bodies.push(JSON.parse(init!.body as string));
      return new Promise((resolve) => pending.push(resolve));
    };
    const view = makeView();
    const controller = new AsYouTypeController(
      new ApiClient("http://127.0.0.1:8787", fetchFn),
      view,
      0,
      "tab",
    );
    controller.model = "copy";

    const first = controller.translateNow("old text");
    const second = controller.translateNow("new text");
    expect(pending).toHaveLength(2);

    // the newer generation completes first
    pending[1]!(jsonResponse({ text: "NEW" }));
    await second;
    expect(view.rendered).toEqual(["NEW"]);

    // the delayed older response must be dropped
    pending[0]!(jsonResponse({ text: "OLD" }));
    await first;
    expect(view.rendered).toEqual(["NEW"]);
  });

  it("drops superseded responses silently", async () => {
    const view = makeView();
    const fetchFn: FetchLike = async () =>
      jsonResponse({ code: "superseded", message: "overtaken" }, 409);
    const controller = new AsYouTypeController(
      new ApiClient("http://127.0.0.1:8787", fetchFn),
      view,
      0,
      "tab",
    );
    controller.model = "copy";
    await controller.translateNow("text");
    expect(view.rendered).toEqual([]);
    expect(view.banners).toEqual([]);
  });

  it("shows a non-blocking banner when the service is unreachable", async () => {
    const view = makeView();
    const fetchFn: FetchLike = async () => {
      throw new Error("connection refused");
    };
    const controller = new AsYouTypeController(
      new ApiClient("http://127.0.0.1:8787", fetchFn),
      view,
      0,
      "tab",
    );
    controller.model = "copy";
    await controller.translateNow("text");
    expect(view.banners).toHaveLength(1);
    expect(view.banners[0]).toContain("unreachable");
    expect(view.rendered).toEqual([]);
  });
});
