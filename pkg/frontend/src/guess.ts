/**
 * Client-side detection of the terminal guess format.
 *
 * Detection exists only to switch the outgoing message kind from `ask_text`
 * to `guess`; the engine's own parser stays authoritative for scoring.
 */

const GUESS_PATTERN = /^My guess of your favorite dress:\s*#(\d+)\.?$/;

export function detectGuess(text: string): number | null {
  const match = GUESS_PATTERN.exec(text.trim());
  if (match === null) {
    return null;
  }
  const index = Number.parseInt(match[1], 10);
  return index >= 1 ? index : null;
}
