"""Serve a sentence-transformers model over the embedding contract used by
`groundcheck --embedder http`:

    POST /  {"texts": ["...", ...]}  ->  {"vectors": [[...], ...], "dim": n}

Usage:
    python scripts/embed_server.py --model sentence-transformers/all-MiniLM-L6-v2 --port 8089

Then record a cache once and replay it offline:
    groundcheck detect --mode cosine --embedder http \
        --embedding-endpoint http://127.0.0.1:8089/ \
        --embedding-identity sentence-transformers/all-MiniLM-L6-v2 \
        --embedding-mode record --embedding-cache embeddings.json --dataset ...
"""

import argparse

import uvicorn
from fastapi import FastAPI
from pydantic import BaseModel
from sentence_transformers import SentenceTransformer


class EmbedRequest(BaseModel):
    texts: list[str]


def build_app(model_name: str) -> FastAPI:
    model = SentenceTransformer(model_name)
    app = FastAPI()

    @app.post("/")
    def embed(req: EmbedRequest) -> dict:
        vectors = model.encode(req.texts, convert_to_numpy=True)
        return {"vectors": vectors.tolist(), "dim": int(vectors.shape[1]) if len(req.texts) else 0}

    return app


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--model", default="sentence-transformers/all-MiniLM-L6-v2")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8089)
    args = parser.parse_args()
    uvicorn.run(build_app(args.model), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
