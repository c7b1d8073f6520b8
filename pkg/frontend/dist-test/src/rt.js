// Reaction-time measurement: render-complete to submit. The timer starts
// only once the stimulus has fully rendered (never at request time), and
// rest-screen time is never counted because the timer is armed after the
// rest screen is dismissed. A clock anomaly (negative delta) flags the
// measurement invalid; the value is still submitted.
export class TrialTimer {
    constructor(clock = { now: () => Date.now() }) {
        this.clock = clock;
        this.shownAt = null;
    }
    markRendered() {
        this.shownAt = this.clock.now();
    }
    get armed() {
        return this.shownAt !== null;
    }
    measure() {
        if (this.shownAt === null) {
            return { rtMs: 0, invalid: true };
        }
        const delta = this.clock.now() - this.shownAt;
        return { rtMs: delta, invalid: delta < 0 };
    }
}
//# sourceMappingURL=rt.js.map