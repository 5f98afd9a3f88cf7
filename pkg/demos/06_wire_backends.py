"""The wire contracts, live: a toy embedding service and a toy scoring LM.

Spins up two local HTTP servers that speak the documented JSON contracts,
points the remote clients at them, and runs one training episode's worth of
calls. Swap the URLs (or set POEM_EMBED_URL / POEM_LM_URL) to use real
services; nothing else changes.

Run:  python3 demos/06_wire_backends.py
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from poem import (
    RemoteEncoder,
    RemoteLM,
    RewardConfig,
    ScoreRequest,
    classification_reward,
    cosine_similarity,
    score_prompt,
)


def serve(handler_fn):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            payload = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            body = json.dumps(handler_fn(payload)).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, port = server.server_address
    return server, f"http://{host}:{port}/"


# Embedding contract: {"texts": [...]} -> {"embeddings": [[...], ...], "dim": n}
def embed_handler(payload):
    rows = []
    for text in payload["texts"]:
        rng = np.random.default_rng(abs(hash(text)) % 2**32)
        vec = rng.standard_normal(8)
        rows.append([float(x) for x in vec / np.linalg.norm(vec)])
    return {"embeddings": rows, "dim": 8}


# LM contract: {"prompt", "mode", "labels"?, "truth"?} ->
#   {"per_label_logprob"} | {"truth_logprobs", "rival_logprobs"} | {"generated_text"}
def lm_handler(payload):
    if payload["mode"] == "classify":
        n = len(payload["prompt"])
        return {
            "per_label_logprob": {
                label: -0.5 - 0.01 * ((n + i) % 7)
                for i, label in enumerate(payload["labels"])
            }
        }
    if payload["mode"] == "sequence":
        return {"truth_logprobs": [-0.2, -0.3], "rival_logprobs": [-1.1]}
    return {"generated_text": "Paris"}


embed_server, embed_url = serve(embed_handler)
lm_server, lm_url = serve(lm_handler)
print("embedding service:", embed_url)
print("scoring service:  ", lm_url)

encoder = RemoteEncoder(embed_url)
vectors = encoder.encode(["good movie", "terrible movie"])
print("\nremote embeddings, dim", vectors[0].dim,
      "cosine:", round(cosine_similarity(*vectors), 4))

lm = RemoteLM(lm_url)
request = ScoreRequest(
    prompt="Review: great film. Sentiment: great\nReview: fine film. Sentiment: ",
    mode="classify",
    labels=("great", "terrible"),
    truth="great",
)
response = score_prompt(lm, request)
print("\nper-label log-probs:", response.per_label_logprob)
reward = classification_reward(RewardConfig(), "great", response.per_label_logprob)
print("classification reward (lambda1=2.0, lambda2=1.8):", round(reward, 4))

generated = score_prompt(lm, ScoreRequest(prompt="Q: capital of France? A:",
                                          mode="generate", truth="paris"))
print("generated:", generated.generated_text)

embed_server.shutdown()
lm_server.shutdown()
