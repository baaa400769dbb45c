import io
import logging
import math
import uuid

import numpy as np
from flask import Flask, Response
from flask_restx import Api, Namespace, Resource, fields
from pydantic import ValidationError

from bench.runner import ExperimentConfig, records_frame, run_experiment
from utils import configure_logging

configure_logging()
app = Flask(__name__)
api = Api(
    app,
    version='1.0',
    title='Stokes Preconditioning Lab API',
    description='Пошаговый API: конфигурация эксперимента -> запуск серии -> результаты -> CSV',
    doc='/docs'
)
ns = Namespace('01 Experiments', description='Конфигурация → Запуск → Результаты → CSV')
api.add_namespace(ns, path='/')
# in-memory хранилище экспериментов
EXPERIMENTS = {}

# ======= Schemas (Models) =======

start_experiment_input = api.model('StartExperimentInput', {
    'levels': fields.List(fields.Integer, description='Уровни сетки n', default=[8, 16]),
    'elements': fields.String(description='Пара элементов', enum=['p2p1', 'p3p2'], default='p2p1'),
    'mu': fields.List(fields.Float, description='Значения вязкости', default=[1.0]),
    'lambda': fields.List(fields.Float, description='Параметры AL', default=[0.0]),
    'method': fields.String(description='Метод', default='method1',
                            enum=['method1', 'method2', 'projection', 'velocity_only', 'bmbt_only']),
    'vel_precond': fields.String(description='Предобуславливатель скорости', default='a3x2vc'),
    'schur_precond': fields.String(description='Предобуславливатель Шура', default='clambdax2vc'),
    'bmbt_mass': fields.String(description='Масса в B M^-1 B^T', default='lumped'),
    'bmbt_precond': fields.String(description='Режим AMG для B M^-1 B^T', default='th'),
    'case': fields.String(description='Тестовое решение', default='div_free'),
    'k_wave': fields.Float(description='Волновое число'),
    'tol': fields.Float(description='Относительный порог невязки', default=1e-10),
    'inner_tol': fields.Float(description='Порог внутренних CG скорости в методе 1'),
    'operator_tol': fields.Float(description='Порог решений с M_Q внутри операторов'),
    'restart': fields.Integer(description='Рестарт GMRES', default=200),
    'max_iter': fields.Integer(description='Максимум итераций', default=1000),
    'seed': fields.Integer(description='Seed возмущения сетки', default=0),
    'perturbation': fields.Float(description='Амплитуда возмущения узлов', default=0.1),
    'threads': fields.Integer(description='Число потоков', default=1),
    'open_boundary': fields.Boolean(description='Свободная граница справа', default=False),
    'include_setup_time': fields.Boolean(description='Учитывать построение AMG во времени', default=False),
})

run_experiment_input = api.model('RunExperimentInput', {
    'experiment_id': fields.String(required=True, description='ID эксперимента')
})

# ======= Helpers =======


def get_experiment_or_404(experiment_id: str):
    experiment = EXPERIMENTS.get(experiment_id)
    if not experiment:
        api.abort(404, f"Experiment {experiment_id} not found")
    return experiment


def _records_json(records):
    rows = []
    for record in records:
        row = {}
        for key, value in record.row().items():
            if isinstance(value, (bool, np.bool_)):
                row[key] = bool(value)
            elif isinstance(value, (float, np.floating)):
                row[key] = None if math.isnan(value) else float(value)
            elif isinstance(value, (int, np.integer)):
                row[key] = int(value)
            else:
                row[key] = value
        rows.append(row)
    return rows

# ======= Endpoints =======


@ns.route('/1-experiment/start')
class StartExperiment(Resource):
    @ns.expect(start_experiment_input)
    @ns.response(201, 'Эксперимент создан')
    @ns.response(400, 'Некорректная конфигурация')
    def post(self):
        data = {k: v for k, v in (api.payload or {}).items() if v is not None}
        try:
            config = ExperimentConfig(**data)
        except ValidationError as exc:
            api.abort(400, f"Invalid experiment config: {exc.errors(include_url=False)}")
        experiment_id = str(uuid.uuid4())
        EXPERIMENTS[experiment_id] = {
            'config': config,
            'records': None,
            'status': 'created'
        }
        logging.info(f"Experiment {experiment_id} created: {config.method} on levels {config.levels}")
        return {
            'experiment_id': experiment_id,
            'status': 'created',
            'next': '/2-experiment/run'
        }, 201


@ns.route('/2-experiment/run')
class RunExperiment(Resource):
    @ns.expect(run_experiment_input, validate=True)
    @ns.response(200, 'Серия выполнена')
    def post(self):
        experiment_id = api.payload['experiment_id']
        e = get_experiment_or_404(experiment_id)
        e['status'] = 'running'
        records = run_experiment(e['config'])
        e['records'] = records
        e['status'] = 'finished' if all(r.converged for r in records) else 'finished_with_failures'
        return {
            'experiment_id': experiment_id,
            'status': e['status'],
            'records': _records_json(records),
            'next': f'/3-experiment/{experiment_id}'
        }


@ns.route('/3-experiment/<string:experiment_id>')
class ExperimentState(Resource):
    @ns.response(200, 'Состояние эксперимента')
    def get(self, experiment_id):
        e = get_experiment_or_404(experiment_id)
        records = e['records'] or []
        return {
            'experiment_id': experiment_id,
            'status': e['status'],
            'config': e['config'].model_dump(by_alias=True),
            'records': _records_json(records) if records else [],
            'errors': {r.run_id: r.error for r in records if r.error}
        }


@ns.route('/4-experiment/<string:experiment_id>/csv')
class ExperimentCsv(Resource):
    @ns.response(200, 'CSV с результатами')
    @ns.response(409, 'Эксперимент ещё не запущен')
    def get(self, experiment_id):
        e = get_experiment_or_404(experiment_id)
        if e['records'] is None:
            api.abort(409, f"Experiment {experiment_id} has not been run")
        buffer = io.StringIO()
        records_frame(e['records']).to_csv(buffer, index=False)
        return Response(buffer.getvalue(), mimetype='text/csv')


if __name__ == '__main__':
    app.run(debug=True)
