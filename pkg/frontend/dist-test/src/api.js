// Typed client for the /v1 trial-service API. All protocol constants
// (trial counts, confidence scale, rest cadence, confirmation delay) come
// from the session payload; nothing is hardcoded client-side.
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
async function asJson(res) {
    const body = await res.text();
    if (!res.ok) {
        let message = body;
        try {
            message = JSON.parse(body).error ?? body;
        }
        catch {
            // non-JSON error body, keep raw text
        }
        throw new ApiError(res.status, message);
    }
    return JSON.parse(body);
}
export class ApiClient {
    constructor(base = "") {
        this.base = base;
    }
    createSession(participantId, seed) {
        return fetch(`${this.base}/v1/sessions`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(seed === undefined ? { participant_id: participantId } : { participant_id: participantId, seed }),
        }).then((res) => asJson(res));
    }
    getSession(sessionId) {
        return fetch(`${this.base}/v1/sessions/${sessionId}`).then((res) => asJson(res));
    }
    getTrial(sessionId, index) {
        return fetch(`${this.base}/v1/sessions/${sessionId}/trials/${index}`).then((res) => asJson(res));
    }
    submitResponse(sessionId, index, body) {
        return fetch(`${this.base}/v1/sessions/${sessionId}/trials/${index}/response`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        }).then((res) => asJson(res));
    }
    async fetchImage(imageUrl) {
        const res = await fetch(`${this.base}${imageUrl}`);
        if (!res.ok)
            throw new ApiError(res.status, `image fetch failed: ${res.status}`);
        const bytes = new Uint8Array(await res.arrayBuffer());
        let binary = "";
        const chunk = 0x8000;
        for (let i = 0; i < bytes.length; i += chunk) {
            binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
        }
        return `data:image/png;base64,${btoa(binary)}`;
    }
}
//# sourceMappingURL=api.js.map