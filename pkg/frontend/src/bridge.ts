/**
 * Bridge session: relays the engine's line protocol to a hosted chat model.
 *
 * Upload batches become user messages (text descriptors plus image parts
 * when media references are present).  Each turn request triggers exactly
 * one endpoint call; the model's reply is forwarded verbatim as `ask_text`
 * unless it matches the terminal guess format, in which case it is sent as
 * a `guess` action.  Verdicts flow back to the model as user messages.
 */

import { readFileSync } from "node:fs";
import * as process from "node:process";

import { ChatClient, ChatMessage, ContentPart, EndpointError } from "./chat.js";
import { detectGuess } from "./guess.js";
import {
  BridgeConfig,
  ConfigError,
  DEFAULT_SYSTEM_PROMPT,
  MediaMode,
  validateConfig,
} from "./prompt.js";
import {
  EngineConnection,
  EngineMessage,
  ItemDescriptor,
  UploadBatchMessage,
} from "./protocol.js";

const VERDICT_TEXT: Record<string, string> = {
  yes: "Yes",
  no: "No",
  unsure: "Unsure",
  skip: "Skip",
};

function describeItems(items: ItemDescriptor[], mode: MediaMode): ContentPart[] {
  const parts: ContentPart[] = [];
  for (const item of items) {
    parts.push({ type: "text", text: `Image ${item.position}: ${item.item_id}` });
    if (item.media !== null) {
      const url =
        mode === "base64" && !item.media.startsWith("data:")
          ? toDataUrl(item.media)
          : item.media;
      parts.push({ type: "image_url", image_url: { url } });
    }
  }
  return parts;
}

function toDataUrl(path: string): string {
  const payload = readFileSync(path).toString("base64");
  return `data:application/octet-stream;base64,${payload}`;
}

export async function bridgeSession(
  engine: EngineConnection,
  config: BridgeConfig,
): Promise<string> {
  validateConfig(config);
  const client = new ChatClient({
    endpoint: config.endpoint,
    model: config.model,
    requestTimeoutMs: config.requestTimeoutMs,
    maxRetries: config.maxRetries,
  });
  const conversation: ChatMessage[] = [
    { role: "system", content: config.systemPrompt },
  ];
  let pendingUpload: ContentPart[] = [];

  for (;;) {
    const message: EngineMessage | null = await engine.next();
    if (message === null) {
      return "engine closed the connection";
    }
    if (message.kind === "upload_batch") {
      pendingUpload = pendingUpload.concat(
        handleBatch(message, config.mediaMode),
      );
      if (message.is_last) {
        pendingUpload.push({ type: "text", text: "End of uploading" });
        conversation.push({ role: "user", content: pendingUpload });
        pendingUpload = [];
      }
      engine.send({ kind: "agent_action", action: "ack" });
    } else if (message.kind === "turn_request") {
      const reply = await client.complete(conversation);
      conversation.push({ role: "assistant", content: reply });
      const index = detectGuess(reply);
      if (index !== null) {
        engine.send({ kind: "agent_action", action: "guess", index });
      } else {
        engine.send({ kind: "agent_action", action: "ask_text", text: reply });
      }
    } else if (message.kind === "verdict") {
      const rendered = VERDICT_TEXT[message.verdict] ?? message.verdict;
      conversation.push({ role: "user", content: rendered });
    } else {
      engine.close();
      return message.outcome;
    }
  }
}

function handleBatch(message: UploadBatchMessage, mode: MediaMode): ContentPart[] {
  const header: ContentPart = {
    type: "text",
    text: `Here is batch ${message.batch_index} of dress options.`,
  };
  return [header, ...describeItems(message.items, mode)];
}

interface CliArgs {
  connect: string;
  endpoint: string;
  model: string;
  media: MediaMode;
  systemPromptPath: string | null;
  requestTimeoutMs: number;
  engineTurnTimeoutMs: number;
  retries: number;
}

export function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = {
    connect: "",
    endpoint: "",
    model: "",
    media: "urls",
    systemPromptPath: null,
    requestTimeoutMs: 60_000,
    engineTurnTimeoutMs: 120_000,
    retries: 2,
  };
  for (let i = 0; i < argv.length; i += 1) {
    const flag = argv[i];
    const value = () => {
      i += 1;
      if (i >= argv.length) {
        throw new ConfigError(`flag ${flag} needs a value`);
      }
      return argv[i];
    };
    switch (flag) {
      case "--connect":
        args.connect = value();
        break;
      case "--endpoint":
        args.endpoint = value();
        break;
      case "--model":
        args.model = value();
        break;
      case "--media":
        args.media = value() as MediaMode;
        break;
      case "--system-prompt":
        args.systemPromptPath = value();
        break;
      case "--request-timeout-ms":
        args.requestTimeoutMs = Number.parseInt(value(), 10);
        break;
      case "--engine-timeout-ms":
        args.engineTurnTimeoutMs = Number.parseInt(value(), 10);
        break;
      case "--retries":
        args.retries = Number.parseInt(value(), 10);
        break;
      default:
        throw new ConfigError(`unknown flag ${flag}`);
    }
  }
  if (!args.connect || !args.endpoint || !args.model) {
    throw new ConfigError("--connect, --endpoint, and --model are required");
  }
  return args;
}

export function configFromArgs(args: CliArgs): BridgeConfig {
  const [host, portText] = splitHostPort(args.connect);
  return {
    connectHost: host,
    connectPort: Number.parseInt(portText, 10),
    endpoint: args.endpoint,
    model: args.model,
    systemPrompt: args.systemPromptPath
      ? readFileSync(args.systemPromptPath, "utf-8")
      : DEFAULT_SYSTEM_PROMPT,
    mediaMode: args.media,
    requestTimeoutMs: args.requestTimeoutMs,
    engineTurnTimeoutMs: args.engineTurnTimeoutMs,
    maxRetries: args.retries,
  };
}

function splitHostPort(value: string): [string, string] {
  const index = value.lastIndexOf(":");
  if (index < 0) {
    throw new ConfigError(`--connect expects host:port, got ${value}`);
  }
  return [value.slice(0, index) || "127.0.0.1", value.slice(index + 1)];
}

async function main(): Promise<number> {
  let config: BridgeConfig;
  try {
    config = configFromArgs(parseArgs(process.argv.slice(2)));
    validateConfig(config);
  } catch (error) {
    console.error(String(error));
    return 2;
  }
  try {
    const engine = await EngineConnection.connect(
      config.connectHost,
      config.connectPort,
    );
    const outcome = await bridgeSession(engine, config);
    console.error(`episode finished: ${outcome}`);
    return 0;
  } catch (error) {
    if (error instanceof EndpointError) {
      console.error(String(error));
      return 3;
    }
    console.error(String(error));
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("bridge.js") || entry.endsWith("amigo-bridge")) {
  main().then((code) => {
    process.exit(code);
  });
}
