/**
 * Adapter CLI.
 *
 *   node dist/cli.js serve --policy uniform [--port 8750] [--fixture f.jsonl]
 *   node dist/cli.js export --annotations a.jsonl --image-root dir \
 *        --out embeddings.jsonl [--encoder toy-v1] [--batch-size 32]
 *   node dist/cli.js make-toy-corpus --out dir [--count 20]
 */

import { exportEmbeddings } from "./exporter.js";
import { startMockServer, type Policy } from "./mockServer.js";
import { makeToyCorpus } from "./toyCorpus.js";
import { ENCODER_NAME } from "./toyEncoder.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${arg}`);
    }
    const value = argv[i + 1];
    if (value === undefined || value.startsWith("--")) {
      throw new Error(`flag ${arg} needs a value`);
    }
    flags.set(arg.slice(2), value);
    i++;
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  const flags = parseFlags(rest);
  if (command === "serve") {
    const policy = (flags.get("policy") ?? "uniform") as Policy;
    if (!["uniform", "echo-label", "fixture-file"].includes(policy)) {
      throw new Error(`unknown policy ${policy}`);
    }
    const { url } = await startMockServer(
      { policy, fixturePath: flags.get("fixture") },
      Number(flags.get("port") ?? 0),
    );
    console.log(url);
    return new Promise(() => {}); // run until killed
  }
  if (command === "export") {
    const rows = exportEmbeddings({
      annotationsPath: required(flags, "annotations"),
      imageRoot: required(flags, "image-root"),
      encoder: flags.get("encoder") ?? ENCODER_NAME,
      outputPath: required(flags, "out"),
      batchSize: flags.has("batch-size") ? Number(flags.get("batch-size")) : undefined,
    });
    console.log(`wrote ${rows.length} embeddings to ${flags.get("out")}`);
    return 0;
  }
  if (command === "make-toy-corpus") {
    const out = makeToyCorpus(required(flags, "out"), Number(flags.get("count") ?? 20));
    console.log(out.annotationsPath);
    return 0;
  }
  console.error("usage: cli.js <serve|export|make-toy-corpus> [flags]");
  return 2;
}

main()
  .then((code) => {
    if (code !== 0) process.exit(code);
  })
  .catch((err) => {
    console.error(JSON.stringify({ error: err?.name ?? "Error", message: String(err?.message ?? err) }));
    process.exit(1);
  });
