// Typed client for the ranking service HTTP API.

export interface CandidateCard {
  id: string;
  image_url: string;
}

export interface SessionPayload {
  session_id: string;
  object_label: string;
  prompt_text: string;
  candidates: CandidateCard[];
}

export interface SubmitOutcome {
  status: "accepted" | "conflict";
  submissions?: number;
  message?: string;
}

export class SessionNotFoundError extends Error {}

export class RankApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  imageUrl(card: CandidateCard): string {
    return this.baseUrl + card.image_url;
  }

  async fetchSession(sessionId: string, participantId: string): Promise<SessionPayload> {
    const url = `${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}` +
      `?participant=${encodeURIComponent(participantId)}`;
    const resp = await this.fetchFn(url);
    if (resp.status === 404) {
      throw new SessionNotFoundError(`session ${sessionId} not found`);
    }
    if (!resp.ok) {
      throw new Error(`fetch session failed: ${resp.status}`);
    }
    return (await resp.json()) as SessionPayload;
  }

  /**
   * POST one best-to-worst ranking of anonymous candidate ids.
   * A repeat submission surfaces as a "conflict" outcome, not an exception;
   * transport failures reject so callers can queue and retry.
   */
  async submitRanking(
    sessionId: string,
    participantId: string,
    ranking: string[],
  ): Promise<SubmitOutcome> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/rankings`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ participant_id: participantId, ranking }),
      },
    );
    if (resp.status === 201) {
      const body = (await resp.json()) as { submissions: number };
      return { status: "accepted", submissions: body.submissions };
    }
    if (resp.status === 409) {
      const body = (await resp.json()) as { error?: string };
      return { status: "conflict", message: body.error };
    }
    const text = await resp.text();
    throw new Error(`submit rejected (${resp.status}): ${text}`);
  }

  async results(sessionId: string): Promise<{
    submissions: number;
    mean_ranks: Record<string, number>;
  }> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/results`,
    );
    if (!resp.ok) {
      throw new Error(`results failed: ${resp.status}`);
    }
    return (await resp.json()) as {
      submissions: number;
      mean_ranks: Record<string, number>;
    };
  }
}
