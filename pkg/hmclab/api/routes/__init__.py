"""Route registration for the API."""

import logging

from flask import Blueprint, Flask, jsonify, request
from werkzeug.exceptions import HTTPException

from ...database import ResultsDatabase
from . import analysis, runs

logger = logging.getLogger(__name__)

SERVICE_STATUS = {'status': 'ok', 'message': 'Sampler analysis service is running'}


def _error(message: str, code: int):
    return jsonify({'status': 'error', 'message': message}), code


def register_routes(app: Flask, store: ResultsDatabase):
    """Analysis and run routes under /api, a root health check, and JSON errors."""
    api_bp = Blueprint('api', __name__, url_prefix='/api')

    @api_bp.route('/health', methods=['GET'])
    def health_check():
        return jsonify(SERVICE_STATUS)

    @app.route('/health', methods=['GET'])
    def root_health_check():
        return jsonify(SERVICE_STATUS)

    analysis.register_routes(api_bp)
    runs.register_routes(api_bp, store)

    @app.errorhandler(ValueError)
    def rejected_parameters(error):
        # LabError subclasses land here too
        logger.info(f"Rejected parameters for {request.path}: {error}")
        return _error(str(error), 400)

    @app.errorhandler(HTTPException)
    def routing_error(error):
        if error.code == 404:
            logger.warning(f"No analysis route at {request.path}")
            return _error(f"no route {request.path}; see /api/health for a liveness check", 404)
        if error.code == 405:
            allowed = sorted(error.valid_methods or [])
            logger.warning(f"{request.method} {request.path} rejected, allowed {allowed}")
            return _error(f"{request.path} accepts {', '.join(allowed)}, not {request.method}", 405)
        if error.code == 400:
            return _error("request body must be a JSON object", 400)
        return _error(error.description or error.name, error.code or 500)

    @app.errorhandler(Exception)
    def analysis_failure(error):
        logger.exception(f"Analysis request {request.method} {request.path} failed: {error}")
        return _error("analysis failed on the server", 500)

    app.register_blueprint(api_bp)
