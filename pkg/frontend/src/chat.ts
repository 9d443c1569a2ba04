/** Minimal chat-completions client for OpenAI-compatible endpoints. */

export type ContentPart =
  | { type: "text"; text: string }
  | { type: "image_url"; image_url: { url: string } };

export interface ChatMessage {
  role: "system" | "user" | "assistant";
  content: string | ContentPart[];
}

export class EndpointError extends Error {}

export interface ChatClientOptions {
  endpoint: string;
  model: string;
  requestTimeoutMs: number;
  maxRetries: number;
}

export class ChatClient {
  constructor(private readonly options: ChatClientOptions) {}

  /** One completion call; retries transient failures before giving up. */
  async complete(messages: ChatMessage[]): Promise<string> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= this.options.maxRetries; attempt += 1) {
      try {
        return await this.request(messages);
      } catch (error) {
        lastError = error;
        if (attempt < this.options.maxRetries) {
          await sleep(Math.min(2000, 250 * 2 ** attempt));
        }
      }
    }
    throw new EndpointError(`endpoint failed after retries: ${String(lastError)}`);
  }

  private async request(messages: ChatMessage[]): Promise<string> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.options.requestTimeoutMs);
    try {
      const response = await fetch(this.options.endpoint, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ model: this.options.model, messages }),
        signal: controller.signal,
      });
      if (!response.ok) {
        throw new EndpointError(`endpoint returned HTTP ${response.status}`);
      }
      const body = (await response.json()) as {
        choices?: Array<{ message?: { content?: unknown } }>;
      };
      const content = body.choices?.[0]?.message?.content;
      if (typeof content !== "string") {
        throw new EndpointError("endpoint response has no message content");
      }
      return content;
    } finally {
      clearTimeout(timer);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
