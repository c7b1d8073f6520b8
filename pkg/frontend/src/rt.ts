// Reaction-time measurement: render-complete to submit. The timer starts
// only once the stimulus has fully rendered (never at request time), and
// rest-screen time is never counted because the timer is armed after the
// rest screen is dismissed. A clock anomaly (negative delta) flags the
// measurement invalid; the value is still submitted.

export interface Clock {
  now(): number;
}

export interface RtMeasurement {
  rtMs: number;
  invalid: boolean;
}

export class TrialTimer {
  private shownAt: number | null = null;

  constructor(private readonly clock: Clock = { now: () => Date.now() }) {}

  markRendered(): void {
    this.shownAt = this.clock.now();
  }

  get armed(): boolean {
    return this.shownAt !== null;
  }

  measure(): RtMeasurement {
    if (this.shownAt === null) {
      return { rtMs: 0, invalid: true };
    }
    const delta = this.clock.now() - this.shownAt;
    return { rtMs: delta, invalid: delta < 0 };
  }
}
