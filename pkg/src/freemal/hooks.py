import logging
import time
from typing import Any, Dict

from kedro.framework.hooks import hook_impl

log = logging.getLogger(__name__)


class PipelineHooks:
    @hook_impl
    def before_pipeline_run(self, run_params: Dict[str, Any], pipeline, catalog):
        self.start_run = time.time()

    @hook_impl
    def after_pipeline_run(self, run_params: Dict[str, Any], pipeline, catalog):
        self.finish_run = time.time()

        log.info(f"Run took {self.finish_run - self.start_run}s")

    @hook_impl
    def on_pipeline_error(
        self, error: Exception, run_params: Dict[str, Any], pipeline, catalog
    ):
        name = run_params["pipeline_name"] or "__default__"
        log.exception(f"Pipeline '{name}' failed: {error}")
