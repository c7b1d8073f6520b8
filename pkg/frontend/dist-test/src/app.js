// Screen-flow controller: info screen, instructions modal, practice trials
// with feedback, test trials without, confirmation screen with timed
// auto-advance, rest screens with a progress bar, completion screen.
//
// Flow and timing rules the tests pin down:
// - class options render in exactly the order the service supplies;
// - submit stays disabled until both a choice and a confidence are set;
// - feedback elements exist only during the practice phase;
// - the confirmation screen advances after protocol.confirm_advance_ms, or
//   immediately on Continue / spacebar;
// - rest screens appear when the service flags them and their time is not
//   counted toward reaction time (the timer arms at image render-complete);
// - a failed submit shows a retry prompt and preserves the entered state.
import { ApiError } from "./api.js";
import { TrialTimer } from "./rt.js";
export class StudyApp {
    constructor(root, api, options = {}) {
        this.root = root;
        this.api = api;
        this.session = null;
        this.state = null;
        this.pendingView = null;
        this.advanceTimer = null;
        this.keyHandler = null;
        this.clock = options.clock ?? { now: () => Date.now() };
        this.doc = root.ownerDocument;
    }
    get protocol() {
        if (!this.session)
            throw new Error("no session");
        return this.session.protocol;
    }
    get screen() {
        return this.root.dataset.screen ?? "info";
    }
    start() {
        this.installKeyboard();
        this.showInfo();
    }
    dispose() {
        if (this.keyHandler)
            this.doc.removeEventListener("keydown", this.keyHandler);
        this.cancelAdvance();
    }
    // -- screens ------------------------------------------------------------
    setScreen(name, build) {
        this.cancelAdvance();
        this.root.dataset.screen = name;
        this.root.textContent = "";
        const host = this.el("div", { class: `screen screen-${name}`, id: `screen-${name}` });
        build(host);
        this.root.appendChild(host);
        if (this.session && name !== "info")
            this.buildInstructionsButton();
    }
    showInfo() {
        this.setScreen("info", (host) => {
            host.appendChild(this.el("h1", { text: "Object recognition study" }));
            host.appendChild(this.el("p", {
                text: "You will see images, many of them heavily scrambled. On every " +
                    "trial, pick the object class that best matches the image and " +
                    "rate how confident you are.",
            }));
            const input = this.el("input", {
                id: "participant-input",
                attrs: { placeholder: "participant id", value: "" },
            });
            const begin = this.el("button", { id: "btn-begin", text: "Continue" });
            begin.addEventListener("click", () => {
                void this.begin(input.value.trim());
            });
            host.appendChild(input);
            host.appendChild(begin);
            host.appendChild(this.el("p", { id: "info-error", class: "error", text: "" }));
        });
    }
    async begin(participantId) {
        if (!participantId) {
            this.text("#info-error", "enter a participant id first");
            return;
        }
        try {
            this.session = await this.api.createSession(participantId);
        }
        catch (err) {
            this.text("#info-error", this.describe(err));
            return;
        }
        this.openInstructions(() => {
            void this.runTrial(this.session.cursor);
        });
    }
    buildInstructionsButton() {
        // reopenable at any time, pinned top right
        const btn = this.el("button", { id: "btn-instructions", text: "Instructions" });
        btn.addEventListener("click", () => this.openInstructions());
        this.root.appendChild(btn);
    }
    openInstructions(onClose) {
        const existing = this.root.querySelector("#modal-instructions");
        if (existing)
            existing.remove();
        const modal = this.el("div", { id: "modal-instructions", class: "modal" });
        modal.appendChild(this.el("h2", { text: "Instructions" }));
        modal.appendChild(this.el("p", {
            text: "Identify the object in each image and select the closest class. " +
                "Rate your confidence from least (1) to most (5). During practice " +
                "you will be told whether you were right; during the main trials " +
                "you will not.",
        }));
        const close = this.el("button", { id: "btn-close-instructions", text: "Start" });
        close.addEventListener("click", () => {
            modal.remove();
            onClose?.();
        });
        modal.appendChild(close);
        this.root.appendChild(modal);
    }
    async runTrial(index) {
        let view;
        try {
            view = await this.api.getTrial(this.session.session_id, index);
        }
        catch (err) {
            this.showError(this.describe(err), () => void this.runTrial(index));
            return;
        }
        if (view.show_rest) {
            this.showRest(view);
            return;
        }
        this.showTrial(view);
    }
    showRest(view) {
        // the reaction timer is not armed here, so rest time is never counted
        this.pendingView = view;
        this.setScreen("rest", (host) => {
            host.appendChild(this.el("h2", { text: "Take a short break" }));
            const done = view.progress.completed_test;
            const total = view.progress.total_test;
            const bar = this.el("div", { class: "progress-track" });
            const fill = this.el("div", { id: "progress-bar", class: "progress-fill" });
            fill.style.width = `${(100 * done) / total}%`;
            bar.appendChild(fill);
            host.appendChild(bar);
            host.appendChild(this.el("p", { id: "progress-text", text: `${done}/${total} test trials completed` }));
            const cont = this.el("button", { id: "btn-continue-rest", text: "Continue" });
            cont.addEventListener("click", () => this.resumeFromRest());
            host.appendChild(cont);
        });
    }
    resumeFromRest() {
        const view = this.pendingView;
        this.pendingView = null;
        if (view)
            this.showTrial(view);
    }
    showTrial(view) {
        const timer = new TrialTimer(this.clock);
        this.state = { view, choice: null, confidence: null, timer };
        this.setScreen("trial", (host) => {
            host.appendChild(this.el("p", {
                id: "phase-label",
                text: view.phase === "practice"
                    ? `Practice trial ${view.phase_index + 1} of ${this.protocol.practice_trials}`
                    : `Trial ${view.phase_index + 1} of ${this.protocol.test_trials}`,
            }));
            const img = this.el("img", { id: "trial-image", attrs: { alt: "stimulus" } });
            host.appendChild(img);
            host.appendChild(this.el("p", { id: "trial-instructions", text: view.instructions }));
            const options = this.el("div", { id: "options" });
            for (const name of view.class_options) {
                const btn = this.el("button", { class: "option", text: name, attrs: { "data-value": name } });
                btn.addEventListener("click", () => this.pickChoice(name));
                options.appendChild(btn);
            }
            host.appendChild(options);
            const confidence = this.el("div", { id: "confidence" });
            const { confidence_min, confidence_max } = this.protocol;
            confidence.appendChild(this.el("span", { text: `Confidence (${confidence_min} = least, ${confidence_max} = most): ` }));
            for (let level = confidence_min; level <= confidence_max; level += 1) {
                const btn = this.el("button", {
                    class: "confidence",
                    text: String(level),
                    attrs: { "data-value": String(level) },
                });
                btn.addEventListener("click", () => this.pickConfidence(level));
                confidence.appendChild(btn);
            }
            host.appendChild(confidence);
            const submit = this.el("button", { id: "btn-submit", text: "Submit" });
            submit.disabled = true;
            submit.addEventListener("click", () => void this.submit());
            host.appendChild(submit);
            host.appendChild(this.el("div", { id: "retry-slot" }));
        });
        void this.loadStimulus(view);
    }
    async loadStimulus(view) {
        const img = this.root.querySelector("#trial-image");
        if (!img)
            return;
        try {
            img.src = await this.api.fetchImage(view.image_url);
            if (typeof img.decode === "function") {
                try {
                    await img.decode();
                }
                catch {
                    // decode failures still count as rendered; the bytes are local
                }
            }
        }
        catch (err) {
            this.showError(this.describe(err), () => void this.loadStimulus(view));
            return;
        }
        // timer starts at render-complete, not at request time
        this.state?.timer.markRendered();
    }
    pickChoice(name) {
        if (!this.state)
            return;
        this.state.choice = name;
        for (const btn of this.root.querySelectorAll(".option")) {
            btn.classList.toggle("selected", btn.getAttribute("data-value") === name);
        }
        this.syncSubmit();
    }
    pickConfidence(level) {
        if (!this.state)
            return;
        this.state.confidence = level;
        for (const btn of this.root.querySelectorAll(".confidence")) {
            btn.classList.toggle("selected", btn.getAttribute("data-value") === String(level));
        }
        this.syncSubmit();
    }
    syncSubmit() {
        const submit = this.root.querySelector("#btn-submit");
        if (submit && this.state) {
            submit.disabled = this.state.choice === null || this.state.confidence === null;
        }
    }
    async submit() {
        const state = this.state;
        if (!state || state.choice === null || state.confidence === null)
            return;
        const submit = this.root.querySelector("#btn-submit");
        if (submit)
            submit.disabled = true; // optimistic disable until the ack
        const rt = state.timer.measure();
        let ack;
        try {
            ack = await this.api.submitResponse(this.session.session_id, state.view.index, {
                choice: state.choice,
                confidence: state.confidence,
                rt_ms: rt.rtMs,
                rt_invalid: rt.invalid,
            });
        }
        catch (err) {
            // network failure: keep the entered state, offer retry
            this.showRetryBanner(this.describe(err));
            return;
        }
        this.state = null;
        this.showConfirmation(ack);
    }
    showRetryBanner(message) {
        const slot = this.root.querySelector("#retry-slot");
        if (!slot)
            return;
        slot.textContent = "";
        const banner = this.el("div", { id: "retry-banner", class: "error" });
        banner.appendChild(this.el("span", { text: `Submission failed: ${message} ` }));
        const retry = this.el("button", { id: "btn-retry", text: "Retry" });
        retry.addEventListener("click", () => {
            this.syncSubmit();
            banner.remove();
            void this.submit();
        });
        banner.appendChild(retry);
        slot.appendChild(banner);
    }
    showConfirmation(ack) {
        this.setScreen("confirm", (host) => {
            host.appendChild(this.el("h2", { id: "confirm-text", text: "Response recorded" }));
            if (ack.feedback) {
                // present only on practice acks; the service never sends feedback
                // for test trials, so no feedback node can exist in the test phase
                host.appendChild(this.el("p", {
                    id: "feedback-banner",
                    class: `feedback ${ack.feedback}`,
                    text: ack.feedback === "correct" ? "Correct!" : "Incorrect",
                }));
            }
            const cont = this.el("button", { id: "btn-continue", text: "Continue" });
            cont.addEventListener("click", () => this.advance(ack));
            host.appendChild(cont);
            host.appendChild(this.el("p", { class: "hint", text: "Continues automatically, or press space." }));
        });
        this.advanceTimer = setTimeout(() => this.advance(ack), this.protocol.confirm_advance_ms);
    }
    advance(ack) {
        this.cancelAdvance();
        if (ack.session_phase === "done" || ack.next_index === null) {
            this.showDone();
            return;
        }
        void this.runTrial(ack.next_index);
    }
    cancelAdvance() {
        if (this.advanceTimer !== null) {
            clearTimeout(this.advanceTimer);
            this.advanceTimer = null;
        }
    }
    showDone() {
        this.setScreen("done", (host) => {
            host.appendChild(this.el("h1", { text: "All done" }));
            host.appendChild(this.el("p", { text: "Every trial is complete. Thank you for taking part." }));
        });
    }
    showError(message, retry) {
        this.setScreen("error", (host) => {
            host.appendChild(this.el("h2", { text: "Connection problem" }));
            host.appendChild(this.el("p", { id: "error-text", class: "error", text: message }));
            const btn = this.el("button", { id: "btn-retry", text: "Retry" });
            btn.addEventListener("click", retry);
            host.appendChild(btn);
        });
    }
    // -- keyboard -------------------------------------------------------------
    installKeyboard() {
        this.keyHandler = (ev) => {
            if (this.screen === "trial" && this.state) {
                const digit = Number.parseInt(ev.key, 10);
                const { confidence_min, confidence_max } = this.protocol;
                if (!Number.isNaN(digit) && digit >= confidence_min && digit <= confidence_max) {
                    this.pickConfidence(digit);
                }
                else if (ev.key === "Enter") {
                    const submit = this.root.querySelector("#btn-submit");
                    if (submit && !submit.disabled)
                        void this.submit();
                }
            }
            else if (this.screen === "confirm" && ev.key === " ") {
                this.root.querySelector("#btn-continue")?.click();
            }
            else if (this.screen === "rest" && ev.key === " ") {
                this.root.querySelector("#btn-continue-rest")?.click();
            }
        };
        this.doc.addEventListener("keydown", this.keyHandler);
    }
    // -- dom helpers ------------------------------------------------------------
    el(tag, opts = {}) {
        const node = this.doc.createElement(tag);
        if (opts.id)
            node.id = opts.id;
        if (opts.class)
            node.className = opts.class;
        if (opts.text !== undefined)
            node.textContent = opts.text;
        for (const [key, value] of Object.entries(opts.attrs ?? {})) {
            node.setAttribute(key, value);
        }
        return node;
    }
    text(selector, value) {
        const node = this.root.querySelector(selector);
        if (node)
            node.textContent = value;
    }
    describe(err) {
        if (err instanceof ApiError)
            return `${err.status}: ${err.message}`;
        return err instanceof Error ? err.message : String(err);
    }
}
//# sourceMappingURL=app.js.map