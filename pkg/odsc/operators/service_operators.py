import argparse

import uvicorn

from ..preferences import get_service_preferences
from ..service import create_app
from ..utils.logging import get_logger
from .common import EXIT_ERROR, EXIT_OK, Operator

logger = get_logger(__name__)


class ODSC_OT_Serve(Operator):
    bl_idname = "serve"
    bl_label = "Run the HTTP service until interrupted"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--port", type=int, dest="listen_port", help="Listen port (env ODS_PORT, default 8080)")
        parser.add_argument("--store-dir", dest="data_dir",
                            help="Directory holding one sub-directory per store (env ODS_DATA_DIR)")
        parser.add_argument("--host", default="127.0.0.1")
        parser.add_argument("--body-limit", type=int, dest="request_body_limit", help="Bytes, default 1 MiB")
        parser.add_argument("--max-concurrent-checks", type=int, dest="max_concurrent_checks")

    def execute(self, args: argparse.Namespace) -> int:
        try:
            config = get_service_preferences(vars(args))
        except ValueError as e:
            self.report({"ERROR"}, str(e))
            return EXIT_ERROR
        logger.info(f"Listening on {args.host}:{config.listen_port}, data in {config.data_dir}")
        uvicorn.run(
            create_app(config),
            host=args.host,
            port=config.listen_port,
            log_level="debug" if self.prefs.developer_mode else "info",
        )
        return EXIT_OK


classes = (
    ODSC_OT_Serve,
)
