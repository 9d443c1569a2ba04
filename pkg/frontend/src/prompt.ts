/** Task prompt and bridge configuration. */

export const DEFAULT_SYSTEM_PROMPT = `Task: I will upload several batches of dress options. Please guess which one is my favorite dress and provide its index in the image gallery (starting index: 1).

Constraints:
1. Ask questions to gather attribute information about the target dress.
2. Ask exactly one Yes/No question per turn about one distinguishable feature. I will respond with Yes, No, Unsure (if not confident), or Skip (if you violate the rules).
3. If you receive Skip, your latest question was invalid and provides no information.
4. Do not ask about sleeve length, garment length, color, pattern/prints, age group, size, shoes, necklace, hat, bag, background, or the human model.
5. Do not enumerate attribute values across turns for the same attribute type (e.g., square neck, V-neck, crew neck).
6. Do not inspect images one-by-one or reference indices (e.g., "is your favorite dress the first image?").
7. Do not guess until you have narrowed the target down to one image.
8. If your confidence is low or you find contradictions, keep asking verification questions.
9. When ready, output: My guess of your favorite dress: #<number>.
10. Only start generating questions after you receive End of uploading.`;

export type MediaMode = "urls" | "base64";

export interface BridgeConfig {
  connectHost: string;
  connectPort: number;
  endpoint: string;
  model: string;
  systemPrompt: string;
  mediaMode: MediaMode;
  requestTimeoutMs: number;
  engineTurnTimeoutMs: number;
  maxRetries: number;
}

export class ConfigError extends Error {}

/** The prompt must spell out all ten protocol constraints. */
export function validateSystemPrompt(prompt: string): void {
  for (let rule = 1; rule <= 10; rule += 1) {
    const marker = new RegExp(`(^|\\n)\\s*${rule}\\.\\s`, "m");
    if (!marker.test(prompt)) {
      throw new ConfigError(`system prompt is missing constraint ${rule}`);
    }
  }
}

export function validateConfig(config: BridgeConfig): void {
  validateSystemPrompt(config.systemPrompt);
  if (config.requestTimeoutMs > config.engineTurnTimeoutMs) {
    throw new ConfigError(
      "endpoint request timeout must not exceed the engine per-turn timeout",
    );
  }
  if (config.mediaMode !== "urls" && config.mediaMode !== "base64") {
    throw new ConfigError(`unknown media mode ${String(config.mediaMode)}`);
  }
}
