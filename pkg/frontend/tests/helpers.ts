import { JSDOM } from "jsdom";

export function makeDom(): { dom: JSDOM; root: HTMLElement } {
  const dom = new JSDOM(
    "<!doctype html><html><body><div id='app'></div></body></html>",
    { url: "http://localhost/" },
  );
  const root = dom.window.document.getElementById("app") as HTMLElement;
  return { dom, root };
}

export async function waitFor(
  predicate: () => boolean,
  { timeout = 10_000, interval = 4, label = "condition" } = {},
): Promise<void> {
  const deadline = Date.now() + timeout;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${label}`);
    await new Promise((resolve) => setTimeout(resolve, interval));
  }
}

export function click(root: HTMLElement, selector: string): void {
  const node = root.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  node.click();
}

export function pressKey(root: HTMLElement, key: string): void {
  const doc = root.ownerDocument;
  const win = doc.defaultView as unknown as { KeyboardEvent: typeof KeyboardEvent };
  doc.dispatchEvent(new win.KeyboardEvent("keydown", { key, bubbles: true }));
}
