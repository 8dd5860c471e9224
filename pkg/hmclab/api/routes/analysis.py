"""Closed-form analysis routes: rates, optimal parameters and certificates."""

import logging
import math

from flask import jsonify, request

from ...analyze import (DEFAULT_CERT_GRID_POINTS, DEFAULT_GRID_POINTS,
                        LyapunovCertificate, RefreshRates, check_certificate,
                        search_certificate, spectral_radius, time_to_accuracy,
                        worst_case_rate)
from ...errors import ParameterError
from ...models import Interval, Spectrum
from ...sample import Variant, optimal_params

logger = logging.getLogger(__name__)

MAX_GRID_POINTS = 100_000


def _json_body() -> dict:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ParameterError("Request body must be a JSON object")
    return data


def _number(data, key, default=None) -> float:
    value = data.get(key, default)
    if value is None:
        raise ParameterError(f"Missing required field '{key}'")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"Field '{key}' must be a number, got {value!r}")


def _grid_points(data, default) -> int:
    points = int(_number(data, 'grid_points', default))
    if not 2 <= points <= MAX_GRID_POINTS:
        raise ParameterError(f"grid_points must lie in [2, {MAX_GRID_POINTS}], got {points}")
    return points


def register_routes(blueprint):
    """Register analysis routes with the Flask blueprint."""

    @blueprint.route('/spectral-radius', methods=['POST'])
    def post_spectral_radius():
        data = _json_body()
        report = spectral_radius(_number(data, 'sigma'), _number(data, 'T'), _number(data, 'eta'))
        return jsonify({'status': 'success', **report.to_dict()})

    @blueprint.route('/worst-case-rate', methods=['POST'])
    def post_worst_case_rate():
        """Worst rate over explicit eigenvalues, or over a grid of [mu, L]."""
        data = _json_body()
        if 'eigenvalues' in data:
            source = Spectrum.from_eigenvalues(data['eigenvalues'])
        else:
            source = Interval(_number(data, 'mu'), _number(data, 'L'))
            if not 0 < source.mu <= source.L:
                raise ParameterError(f"need 0 < mu <= L, got mu={source.mu}, L={source.L}")
        measure = data.get('measure', 'gram')
        rate = worst_case_rate(source, _number(data, 'T'), _number(data, 'eta'),
                               _grid_points(data, DEFAULT_GRID_POINTS), measure)
        return jsonify({'status': 'success', 'rate': rate, 'measure': measure})

    @blueprint.route('/optimal-params', methods=['GET'])
    def get_optimal_params():
        args = request.args
        variant = Variant(args.get('variant', 'damped'))
        mu, L = _number(args, 'mu'), _number(args, 'L')
        eps = _number(args, 'eps', 1e-2)
        sigma = None
        if variant is Variant.COORDINATE:
            sigma = Spectrum.from_bounds(int(_number(args, 'd', 10)), mu, L).sigma
        return jsonify({'status': 'success', **optimal_params(variant, mu, L, eps, sigma=sigma)})

    @blueprint.route('/certificates/search', methods=['POST'])
    def post_certificate_search():
        data = _json_body()
        mu, L = _number(data, 'mu'), _number(data, 'L')
        rates = data.get('rates')
        if not isinstance(rates, dict):
            raise ParameterError("Field 'rates' must be an object {kind, value}")
        rates = RefreshRates(rates.get('kind', 'constant'), _number(rates, 'value'))
        grid_points = _grid_points(data, DEFAULT_CERT_GRID_POINTS)
        logger.info(f"Certificate search for mu={mu}, L={L}, rates={rates.to_dict()}")
        cert = search_certificate(mu, L, _number(data, 'eta', 0.0), rates,
                                  data.get('metric', 'flat'), grid_points)
        check = check_certificate(mu, L, cert, grid_points)
        eps = _number(data, 'eps', 1e-2)
        # JSON has no infinity; a certificate without a finite horizon reports null
        horizon = time_to_accuracy(cert, eps, mu, L)
        return jsonify({
            'status': 'success',
            'certificate': cert.to_dict(),
            'check': check.to_dict(),
            'time_to_accuracy': horizon if math.isfinite(horizon) else None,
        })

    @blueprint.route('/certificates/check', methods=['POST'])
    def post_certificate_check():
        data = _json_body()
        mu, L = _number(data, 'mu'), _number(data, 'L')
        raw = data.get('certificate')
        if not isinstance(raw, dict):
            raise ParameterError("Field 'certificate' must be an object")
        try:
            cert = LyapunovCertificate.from_dict(raw)
        except (KeyError, TypeError) as e:
            raise ParameterError(f"Invalid certificate: {e}")
        check = check_certificate(mu, L, cert, _grid_points(data, DEFAULT_CERT_GRID_POINTS))
        return jsonify({'status': 'success', **check.to_dict()})
