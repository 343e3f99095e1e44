import type http from "node:http";

import express from "express";
import type { Request, Response } from "express";

import { TinyClassifier } from "./model.js";

/**
 * The classifier wire contract: POST / with {"premise", "hypothesis"}
 * answers {"label", "scores"}, scores summing to 1 over the three labels.
 */
export function createApp(model: TinyClassifier): express.Express {
  const app = express();
  app.use(express.json());
  app.get("/healthz", (_req: Request, res: Response) => {
    res.json({ status: "ok" });
  });
  app.post("/", (req: Request, res: Response) => {
    const { premise, hypothesis } = (req.body ?? {}) as {
      premise?: unknown;
      hypothesis?: unknown;
    };
    if (typeof premise !== "string" || premise === "" ||
        typeof hypothesis !== "string" || hypothesis === "") {
      res.status(400).json({ error: "premise and hypothesis are required" });
      return;
    }
    res.json(model.predict(premise, hypothesis));
  });
  return app;
}

/** Load the artifact and listen; rejects if the port is taken. */
export function serve(modelDir: string, port: number, host = "127.0.0.1"): Promise<http.Server> {
  const model = TinyClassifier.load(modelDir);
  const app = createApp(model);
  return new Promise((resolve, reject) => {
    const server = app.listen(port, host);
    server.on("listening", () => resolve(server));
    server.on("error", reject);
  });
}
