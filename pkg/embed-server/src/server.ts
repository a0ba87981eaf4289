// Embedding microservice speaking the /v1 wire protocol:
//
//   POST /v1/info        -> {name, dim, token_budget}
//   POST /v1/embed_text  {texts: [string]}     -> {vectors, truncated}
//   POST /v1/embed_image {images: [b64 PNG]}   -> {vectors}
//
// Every vector is unit-norm; request order is preserved. 400 covers
// malformed payloads, 413 batches over the configured max, 503 overload.
// Image preprocessing stays server-side so clients only ship raw PNGs.

import express, { NextFunction, Request, Response } from "express";
import { z } from "zod";
import yargs from "yargs";

import {
  DIM,
  EncodeError,
  TOKEN_BUDGET,
  embedImagePng,
  embedText,
} from "./encoder";

export interface ServerConfig {
  model: string; // encoder identifier reported by /v1/info
  host: string;
  port: number;
  maxBatch: number;
  device: string; // hint only; the analytic encoder is device-free
  maxInFlight: number;
  testHooks: boolean;
}

export const DEFAULT_CONFIG: ServerConfig = {
  model: "color-analytic",
  host: "127.0.0.1",
  port: 8900,
  maxBatch: 32,
  device: "cpu",
  maxInFlight: 64,
  testHooks: false,
};

const textBody = z.object({ texts: z.array(z.string()).min(1) });
const imageBody = z.object({ images: z.array(z.string()).min(1) });
const hookBody = z.object({
  status: z.number().int().min(400).max(599),
  count: z.number().int().min(1).default(1),
});

export function createApp(config: ServerConfig) {
  if (config.maxBatch < 1) throw new Error("maxBatch must be >= 1");
  const app = express();
  app.use(express.json({ limit: "64mb" }));

  // deterministic failure injection so client retry paths are testable
  const failQueue: number[] = [];
  if (config.testHooks) {
    app.post("/test/fail-next", (req: Request, res: Response) => {
      const parsed = hookBody.safeParse(req.body);
      if (!parsed.success) {
        res.status(400).json({ error: "hook body must be {status, count?}" });
        return;
      }
      for (let i = 0; i < parsed.data.count; i++) failQueue.push(parsed.data.status);
      res.json({ queued: failQueue.length });
    });
  }

  let inFlight = 0;
  app.use("/v1", (req: Request, res: Response, next: NextFunction) => {
    if (failQueue.length > 0) {
      const status = failQueue.shift() as number;
      res.status(status).json({ error: `injected ${status}` });
      return;
    }
    if (inFlight >= config.maxInFlight) {
      res.status(503).json({ error: "overloaded, retry later" });
      return;
    }
    inFlight += 1;
    res.on("finish", () => {
      inFlight -= 1;
    });
    next();
  });

  app.post("/v1/info", (_req: Request, res: Response) => {
    res.json({ name: config.model, dim: DIM, token_budget: TOKEN_BUDGET });
  });

  app.post("/v1/embed_text", (req: Request, res: Response) => {
    const parsed = textBody.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: "body must be {texts: [string, ...]}" });
      return;
    }
    const texts = parsed.data.texts;
    if (texts.length > config.maxBatch) {
      res.status(413).json({
        error: `batch of ${texts.length} exceeds max ${config.maxBatch}`,
      });
      return;
    }
    try {
      const results = texts.map(embedText);
      res.json({
        vectors: results.map((r) => Array.from(r.vector)),
        truncated: results.map((r) => r.truncated),
      });
    } catch (err) {
      replyEncodeError(res, err);
    }
  });

  app.post("/v1/embed_image", (req: Request, res: Response) => {
    const parsed = imageBody.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: "body must be {images: [base64 PNG, ...]}" });
      return;
    }
    const images = parsed.data.images;
    if (images.length > config.maxBatch) {
      res.status(413).json({
        error: `batch of ${images.length} exceeds max ${config.maxBatch}`,
      });
      return;
    }
    try {
      res.json({ vectors: images.map((b64) => Array.from(embedImagePng(b64))) });
    } catch (err) {
      replyEncodeError(res, err);
    }
  });

  // body-parser JSON failures land here with err.status 400
  app.use((err: any, _req: Request, res: Response, next: NextFunction) => {
    if (res.headersSent) {
      next(err);
      return;
    }
    const status = typeof err?.status === "number" ? err.status : 500;
    res.status(status).json({ error: err?.message ?? "internal error" });
  });

  return app;
}

function replyEncodeError(res: Response, err: unknown): void {
  if (err instanceof EncodeError) {
    res.status(400).json({ error: err.message });
    return;
  }
  throw err;
}

export function main(argv: string[]): void {
  const args = yargs(argv)
    .option("model", { type: "string", default: DEFAULT_CONFIG.model })
    .option("host", { type: "string", default: DEFAULT_CONFIG.host })
    .option("port", { type: "number", default: DEFAULT_CONFIG.port })
    .option("max-batch", { type: "number", default: DEFAULT_CONFIG.maxBatch })
    .option("device", { type: "string", default: DEFAULT_CONFIG.device })
    .option("max-in-flight", { type: "number", default: DEFAULT_CONFIG.maxInFlight })
    .option("test-hooks", { type: "boolean", default: false })
    .strict()
    .parseSync();

  const config: ServerConfig = {
    model: args.model,
    host: args.host,
    port: args.port,
    maxBatch: args["max-batch"],
    device: args.device,
    maxInFlight: args["max-in-flight"],
    testHooks: args["test-hooks"],
  };
  const app = createApp(config);
  app.listen(config.port, config.host, () => {
    console.log(
      `embed-server (${config.model}, dim ${DIM}) listening on ` +
        `http://${config.host}:${config.port}`
    );
  });
}

if (require.main === module) {
  main(process.argv.slice(2));
}
