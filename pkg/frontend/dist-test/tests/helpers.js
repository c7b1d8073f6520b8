import { JSDOM } from "jsdom";
export function makeDom() {
    const dom = new JSDOM("<!doctype html><html><body><div id='app'></div></body></html>", { url: "http://localhost/" });
    const root = dom.window.document.getElementById("app");
    return { dom, root };
}
export async function waitFor(predicate, { timeout = 10000, interval = 4, label = "condition" } = {}) {
    const deadline = Date.now() + timeout;
    while (!predicate()) {
        if (Date.now() > deadline)
            throw new Error(`timed out waiting for ${label}`);
        await new Promise((resolve) => setTimeout(resolve, interval));
    }
}
export function click(root, selector) {
    const node = root.querySelector(selector);
    if (!node)
        throw new Error(`no element matches ${selector}`);
    node.click();
}
export function pressKey(root, key) {
    const doc = root.ownerDocument;
    const win = doc.defaultView;
    doc.dispatchEvent(new win.KeyboardEvent("keydown", { key, bubbles: true }));
}
//# sourceMappingURL=helpers.js.map